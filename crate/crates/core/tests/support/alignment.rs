//! Exhaustive alignment oracle: lists every global alignment as a column
//! sequence, then scores each list on its own.

use loanword::pmialign::PmiMatrix;

#[derive(Clone, Copy, PartialEq)]
enum Col {
    Pair(char, char),
    GapInB(char),
    GapInA(char),
}

fn enumerate(a: &[char], b: &[char], prefix: &mut Vec<Col>, out: &mut Vec<Vec<Col>>) {
    if a.is_empty() && b.is_empty() {
        out.push(prefix.clone());
        return;
    }
    if let (Some(&x), Some(&y)) = (a.first(), b.first()) {
        prefix.push(Col::Pair(x, y));
        enumerate(&a[1..], &b[1..], prefix, out);
        prefix.pop();
    }
    if let Some(&x) = a.first() {
        prefix.push(Col::GapInB(x));
        enumerate(&a[1..], b, prefix, out);
        prefix.pop();
    }
    if let Some(&y) = b.first() {
        prefix.push(Col::GapInA(y));
        enumerate(a, &b[1..], prefix, out);
        prefix.pop();
    }
}

/// A gap column opens unless the column before it is a gap on the same side.
fn score(cols: &[Col], m: &PmiMatrix) -> f64 {
    let mut total = 0.0;
    for (i, c) in cols.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| cols[p]);
        total += match *c {
            Col::Pair(x, y) => m.score(x, y).unwrap(),
            Col::GapInB(_) => match prev {
                Some(Col::GapInB(_)) => m.gap_extend,
                _ => m.gap_open,
            },
            Col::GapInA(_) => match prev {
                Some(Col::GapInA(_)) => m.gap_extend,
                _ => m.gap_open,
            },
        };
    }
    total
}

pub fn best_score(a: &str, b: &str, m: &PmiMatrix) -> f64 {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut all = Vec::new();
    enumerate(&a, &b, &mut Vec::new(), &mut all);
    all.iter().map(|c| score(c, m)).fold(f64::NEG_INFINITY, f64::max)
}

pub fn toy_matrix() -> PmiMatrix {
    PmiMatrix::new(
        vec!['p', 'a', 't'],
        vec![2.0, -1.0, 0.5, -1.0, 1.5, -0.8, 0.5, -0.8, 2.5],
        -1.2,
        -0.4,
    )
    .unwrap()
}

/// Every word over `alphabet` of length 1 to `max_len`.
pub fn words(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| alphabet.iter().map(move |c| format!("{w}{c}")))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}
