#!/usr/bin/env python3
"""Regenerates the bundled resource fixtures.

features.tsv  - 39-dim ternary phonetic feature vectors (0 = does not apply,
                1 = not applicable, 2 = applies) for a compact IPA inventory.
asjp.tsv      - IPA -> ASJP symbol mapping plus diacritic fallback rules.
pmi.tsv       - a synthetic, symmetric 41x41 ASJP correspondence matrix with
                gap parameters. It is derived from coarse articulatory classes
                and is NOT an empirically estimated PMI table; swap in a real
                table for published-scale experiments.

Run from this directory: python3 generate_resources.py
"""

FEATURES = [
    "consonantal", "sonorant", "syllabic", "continuant", "delayed_release",
    "nasal", "lateral", "trill", "tap", "approximant", "voice",
    "spread_glottis", "constricted_glottis", "labial", "round",
    "labiodental", "coronal", "anterior", "distributed", "strident",
    "dorsal", "high", "low", "front", "back", "tense", "pharyngeal",
    "glottal", "long", "nasalized", "palatalized", "labialized",
    "velarized", "ejective", "click", "diphthong_start", "diphthong_end",
    "tone_high", "tone_low",
]
assert len(FEATURES) == 39
IDX = {f: i for i, f in enumerate(FEATURES)}

# place -> set of place features that apply
PLACES = {
    "bilabial": {"labial"},
    "labiodental": {"labial", "labiodental"},
    "dental": {"coronal", "anterior", "distributed"},
    "alveolar": {"coronal", "anterior"},
    "postalveolar": {"coronal", "distributed", "high"},
    "retroflex": {"coronal"},
    "palatal": {"dorsal", "high", "front", "coronal", "distributed"},
    "alveolopalatal": {"coronal", "distributed", "high", "front"},
    "velar": {"dorsal", "high", "back"},
    "uvular": {"dorsal", "back"},
    "pharyngeal": {"pharyngeal", "low", "back"},
    "glottal": {"glottal"},
}

MANNERS = {
    "stop": set(),
    "nasal": {"sonorant", "nasal"},
    "fricative": {"continuant"},
    "affricate": {"delayed_release"},
    "trill": {"sonorant", "continuant", "trill"},
    "tap": {"sonorant", "tap"},
    "approximant": {"sonorant", "continuant", "approximant"},
    "lateral": {"sonorant", "continuant", "lateral", "approximant"},
    "lateral_fricative": {"continuant", "lateral"},
    "click": {"click"},
}

CONSONANTS = [
    # symbol, place, manner, voiced
    ("p", "bilabial", "stop", False), ("b", "bilabial", "stop", True),
    ("t", "alveolar", "stop", False), ("d", "alveolar", "stop", True),
    ("ʈ", "retroflex", "stop", False), ("ɖ", "retroflex", "stop", True),
    ("c", "palatal", "stop", False), ("ɟ", "palatal", "stop", True),
    ("k", "velar", "stop", False), ("g", "velar", "stop", True),
    ("ɡ", "velar", "stop", True),
    ("q", "uvular", "stop", False), ("ɢ", "uvular", "stop", True),
    ("ʔ", "glottal", "stop", False),
    ("m", "bilabial", "nasal", True), ("ɱ", "labiodental", "nasal", True),
    ("n", "alveolar", "nasal", True), ("ɳ", "retroflex", "nasal", True),
    ("ɲ", "palatal", "nasal", True), ("ŋ", "velar", "nasal", True),
    ("ɴ", "uvular", "nasal", True),
    ("r", "alveolar", "trill", True), ("ʀ", "uvular", "trill", True),
    ("ʙ", "bilabial", "trill", True),
    ("ɾ", "alveolar", "tap", True), ("ɽ", "retroflex", "tap", True),
    ("ɸ", "bilabial", "fricative", False), ("β", "bilabial", "fricative", True),
    ("f", "labiodental", "fricative", False), ("v", "labiodental", "fricative", True),
    ("θ", "dental", "fricative", False), ("ð", "dental", "fricative", True),
    ("s", "alveolar", "fricative", False), ("z", "alveolar", "fricative", True),
    ("ʃ", "postalveolar", "fricative", False), ("ʒ", "postalveolar", "fricative", True),
    ("ʂ", "retroflex", "fricative", False), ("ʐ", "retroflex", "fricative", True),
    ("ɕ", "alveolopalatal", "fricative", False), ("ʑ", "alveolopalatal", "fricative", True),
    ("ç", "palatal", "fricative", False), ("ʝ", "palatal", "fricative", True),
    ("x", "velar", "fricative", False), ("ɣ", "velar", "fricative", True),
    ("χ", "uvular", "fricative", False), ("ʁ", "uvular", "fricative", True),
    ("ħ", "pharyngeal", "fricative", False), ("ʕ", "pharyngeal", "fricative", True),
    ("h", "glottal", "fricative", False), ("ɦ", "glottal", "fricative", True),
    ("ɬ", "alveolar", "lateral_fricative", False), ("ɮ", "alveolar", "lateral_fricative", True),
    ("ʋ", "labiodental", "approximant", True), ("ɹ", "alveolar", "approximant", True),
    ("ɻ", "retroflex", "approximant", True), ("j", "palatal", "approximant", True),
    ("ɰ", "velar", "approximant", True),
    ("l", "alveolar", "lateral", True), ("ɭ", "retroflex", "lateral", True),
    ("ʎ", "palatal", "lateral", True), ("ʟ", "velar", "lateral", True),
    ("ts", "alveolar", "affricate", False), ("dz", "alveolar", "affricate", True),
    ("tʃ", "postalveolar", "affricate", False), ("dʒ", "postalveolar", "affricate", True),
    ("tɕ", "alveolopalatal", "affricate", False), ("dʑ", "alveolopalatal", "affricate", True),
    ("ǀ", "dental", "click", False), ("ǃ", "alveolar", "click", False),
    ("ǂ", "palatal", "click", False), ("ǁ", "alveolar", "click", False),
    ("ʘ", "bilabial", "click", False),
]

VOWELS = [
    # symbol, height (high/mid_high/mid_low/low/mid), backness, round
    ("i", "high", "front", False), ("y", "high", "front", True),
    ("ɨ", "high", "central", False), ("ʉ", "high", "central", True),
    ("ɯ", "high", "back", False), ("u", "high", "back", True),
    ("ɪ", "near_high", "front", False), ("ʏ", "near_high", "front", True),
    ("ʊ", "near_high", "back", True),
    ("e", "mid_high", "front", False), ("ø", "mid_high", "front", True),
    ("ɘ", "mid_high", "central", False), ("ɵ", "mid_high", "central", True),
    ("ɤ", "mid_high", "back", False), ("o", "mid_high", "back", True),
    ("ə", "mid", "central", False),
    ("ɛ", "mid_low", "front", False), ("œ", "mid_low", "front", True),
    ("ɜ", "mid_low", "central", False), ("ɞ", "mid_low", "central", True),
    ("ʌ", "mid_low", "back", False), ("ɔ", "mid_low", "back", True),
    ("æ", "near_low", "front", False), ("ɐ", "near_low", "central", False),
    ("a", "low", "front", False), ("ɶ", "low", "front", True),
    ("ɑ", "low", "back", False), ("ɒ", "low", "back", True),
]


def blank():
    return [0] * 39


def consonant(place, manner, voiced):
    v = blank()
    for f in ("consonantal",):
        v[IDX[f]] = 2
    for f in ("syllabic", "long", "nasalized", "palatalized", "labialized",
              "velarized", "ejective", "spread_glottis", "constricted_glottis"):
        v[IDX[f]] = 0
    # vowel-only and tone features do not apply to consonants
    for f in ("tense", "round", "diphthong_start", "diphthong_end",
              "tone_high", "tone_low"):
        v[IDX[f]] = 1
    for f in MANNERS[manner]:
        v[IDX[f]] = 2
    for f in PLACES[place]:
        v[IDX[f]] = 2
    if place == "glottal":
        v[IDX["consonantal"]] = 0
    if not any(p in PLACES[place] for p in ("dorsal",)):
        for f in ("high", "low", "front", "back"):
            if v[IDX[f]] == 0:
                v[IDX[f]] = 1
    if voiced:
        v[IDX["voice"]] = 2
    if manner in ("fricative", "affricate") and place in (
            "labiodental", "alveolar", "postalveolar", "retroflex", "alveolopalatal"):
        v[IDX["strident"]] = 2
    if place == "bilabial" and manner in ("stop", "nasal", "trill", "click"):
        v[IDX["round"]] = 1
    return v


HEIGHT = {
    "high": (2, 0, 2), "near_high": (2, 0, 0), "mid_high": (0, 0, 2),
    "mid": (0, 0, 0), "mid_low": (0, 0, 0), "near_low": (0, 2, 0),
    "low": (0, 2, 2),
}


def vowel(height, backness, rounded):
    v = blank()
    v[IDX["sonorant"]] = 2
    v[IDX["syllabic"]] = 2
    v[IDX["continuant"]] = 2
    v[IDX["approximant"]] = 2
    v[IDX["voice"]] = 2
    v[IDX["dorsal"]] = 2
    for f in ("delayed_release", "trill", "tap", "lateral", "strident",
              "anterior", "distributed", "click", "ejective", "labiodental"):
        v[IDX[f]] = 1
    high, low, tense = HEIGHT[height]
    v[IDX["high"]] = high
    v[IDX["low"]] = low
    v[IDX["tense"]] = tense
    if height == "mid_low":
        v[IDX["tense"]] = 0
    v[IDX["front"]] = 2 if backness == "front" else 0
    v[IDX["back"]] = 2 if backness == "back" else 0
    if rounded:
        v[IDX["round"]] = 2
        v[IDX["labial"]] = 2
    for f in ("diphthong_start", "diphthong_end", "tone_high", "tone_low"):
        v[IDX[f]] = 0
    return v


def modified(base, **features):
    v = list(base)
    for f, val in features.items():
        v[IDX[f]] = val
    return v


def build_features():
    table = {}
    for sym, place, manner, voiced in CONSONANTS:
        table[sym] = consonant(place, manner, voiced)
    for sym, height, backness, rounded in VOWELS:
        table[sym] = vowel(height, backness, rounded)

    for base in ("p", "t", "k", "q", "c", "ts", "tʃ", "tɕ", "b", "d", "g"):
        table[base + "ʰ"] = modified(table[base], spread_glottis=2)
    for base in ("p", "t", "k", "q", "ts", "tʃ", "s"):
        table[base + "ʼ"] = modified(table[base], constricted_glottis=2, ejective=2)
    for base in ("k", "g", "q", "x", "h", "kʼ"):
        table[base + "ʷ"] = modified(table[base], labialized=2)
    for base in ("t", "d", "n", "l", "s", "r"):
        table[base + "ʲ"] = modified(table[base], palatalized=2)
    for base in ("m", "n", "l", "s", "t", "k"):
        table[base + "ː"] = modified(table[base], long=2)
    for sym, _, _, _ in VOWELS:
        table[sym + "ː"] = modified(table[sym], long=2)
    for base in ("a", "e", "i", "o", "u", "ə", "ɛ", "ɔ"):
        table[base + "̃"] = modified(table[base], nasalized=2)
    table["ã"] = modified(table["a"], nasalized=2)  # precomposed U+00E3
    for base in ("a", "e", "i", "o", "u"):
        table[base + "́"] = modified(table[base], tone_high=2)
        table[base + "̀"] = modified(table[base], tone_low=2)

    tone = [1] * 39
    for f in ("tone_high", "tone_low"):
        tone[IDX[f]] = 0
    table["˥"] = modified(tone, tone_high=2)
    table["˦"] = modified(tone, tone_high=2, tone_low=0)
    table["˧"] = modified(tone)
    table["˨"] = modified(tone, tone_low=2, tone_high=0)
    table["˩"] = modified(tone, tone_low=2)
    for d, hi, lo in (("¹", 0, 2), ("²", 0, 2), ("³", 0, 0), ("⁴", 2, 0), ("⁵", 2, 0)):
        table[d] = modified(tone, tone_high=hi, tone_low=lo)
    length = [1] * 39
    length[IDX["long"]] = 2
    table["ː"] = length
    return table


ASJP = list("pbfvmw8tdszcnrlSZCjT5ykgxNqGX7hL4!ieE3auo")
assert len(ASJP) == 41 and len(set(ASJP)) == 41

BASE_ASJP = {
    "p": "p", "b": "b", "ʙ": "b", "f": "f", "ɸ": "f", "v": "v", "β": "v",
    "ʋ": "v", "m": "m", "ɱ": "m", "w": "w", "ɰ": "w", "θ": "8", "ð": "8",
    "t": "t", "ʈ": "t", "d": "d", "ɖ": "d", "s": "s", "z": "z",
    "ts": "c", "dz": "c", "n": "n", "ɳ": "n", "r": "r", "ʀ": "r",
    "ɾ": "r", "ɽ": "r", "ɹ": "r", "ɻ": "r", "l": "l", "ɭ": "l",
    "ʃ": "S", "ʂ": "S", "ɕ": "S", "ç": "S", "ʒ": "Z", "ʐ": "Z", "ʑ": "Z",
    "tʃ": "C", "tɕ": "C", "dʒ": "j", "dʑ": "j", "c": "T", "ɟ": "T",
    "ɲ": "5", "j": "y", "ʝ": "y", "k": "k", "g": "g", "ɡ": "g",
    "x": "x", "ɣ": "x", "ŋ": "N", "ɴ": "N", "q": "q", "ɢ": "G",
    "χ": "X", "ʁ": "X", "ħ": "X", "ʕ": "X", "ʔ": "7", "h": "h", "ɦ": "h",
    "ɬ": "L", "ɮ": "L", "ʎ": "L", "ʟ": "L",
    "ǀ": "!", "ǃ": "!", "ǂ": "!", "ǁ": "!", "ʘ": "!",
    "i": "i", "y": "i", "ɪ": "i", "ʏ": "i",
    "e": "e", "ø": "e", "ɛ": "E", "œ": "E", "æ": "E",
    "ɨ": "3", "ʉ": "3", "ɘ": "3", "ɵ": "3", "ə": "3", "ɜ": "3", "ɞ": "3",
    "ɐ": "3", "ʌ": "3",
    "a": "a", "ɶ": "a", "ɑ": "a", "ɒ": "a", "ã": "a",
    "u": "u", "ɯ": "u", "ʊ": "u", "o": "o", "ɤ": "o", "ɔ": "o",
}


# coarse classes for the synthetic correspondence matrix
CLASS = {}
for s in "pbfvmw8":
    CLASS[s] = "labial"
for s in "tdszcnrl":
    CLASS[s] = "coronal"
for s in "SZCjT5y":
    CLASS[s] = "palatal"
for s in "kgxNqGX":
    CLASS[s] = "dorsal"
for s in "7h":
    CLASS[s] = "glottal"
for s in "L4!":
    CLASS[s] = "other"
for s in "ieE3auo":
    CLASS[s] = "vowel"

MANNER = {
    "p": "stop", "b": "stop", "t": "stop", "d": "stop", "k": "stop", "g": "stop",
    "q": "stop", "G": "stop", "T": "stop", "7": "stop", "c": "affr", "C": "affr",
    "j": "affr", "f": "fric", "v": "fric", "8": "fric", "s": "fric", "z": "fric",
    "S": "fric", "Z": "fric", "x": "fric", "X": "fric", "h": "fric",
    "m": "nasal", "n": "nasal", "N": "nasal", "5": "nasal", "4": "nasal",
    "w": "glide", "y": "glide", "r": "liquid", "l": "liquid", "L": "liquid",
    "!": "click",
}


def pmi_score(a, b):
    if a == b:
        return 3.6 if CLASS[a] != "vowel" else 2.2
    ca, cb = CLASS[a], CLASS[b]
    if ca == "vowel" and cb == "vowel":
        return 0.4
    if (ca == "vowel") != (cb == "vowel"):
        return -2.4
    score = -1.8
    if ca == cb:
        score += 1.2
    if MANNER.get(a) == MANNER.get(b):
        score += 0.9
    return round(score, 4)


def main():
    table = build_features()
    with open("features.tsv", "w", encoding="utf-8") as fh:
        fh.write("SYMBOL\t" + "\t".join(f"F{i + 1}" for i in range(39)) + "\n")
        for sym in sorted(table):
            vec = table[sym]
            assert len(vec) == 39 and all(x in (0, 1, 2) for x in vec), sym
            fh.write(sym + "\t" + "\t".join(str(x) for x in vec) + "\n")

    with open("asjp.tsv", "w", encoding="utf-8") as fh:
        fh.write("IPA\tASJP\n")
        for sym in sorted(BASE_ASJP):
            assert BASE_ASJP[sym] in ASJP
            fh.write(f"{sym}\t{BASE_ASJP[sym]}\n")
        fh.write("#rule\tcombining\tstrip\n")
        fh.write("#rule\tmodifier\tstrip\n")
        fh.write("#rule\ttone\tstrip\n")

    with open("pmi.tsv", "w", encoding="utf-8") as fh:
        fh.write("\t".join(ASJP) + "\n")
        for a in ASJP:
            fh.write(a + "\t" + "\t".join(f"{pmi_score(a, b):.4f}" for b in ASJP) + "\n")
        fh.write("#gap_open -2.5\n")
        fh.write("#gap_extend -1.6\n")


if __name__ == "__main__":
    main()
