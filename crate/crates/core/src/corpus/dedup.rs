use super::ClaimPair;

/// Character-level edit distance (unit-cost insert, delete, substitute).
pub fn levenshtein_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    distance_chars(&a, &b)
}

fn distance_chars(a: &[char], b: &[char]) -> usize {
    // Iterate over the longer string so the rows stay short.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0; short.len() + 1];
    for (i, lc) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let substitute = prev[j] + usize::from(lc != sc);
            curr[j + 1] = substitute.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// `1 - d(a, b) / max(|a|, |b|)` over characters; `1.0` when both are empty.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratio_chars(&a, &b)
}

fn ratio_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - distance_chars(a, b) as f64 / longest as f64
}

/// Drops every pair whose input/verified texts have a Levenshtein ratio above
/// `max_ratio`. Survivors keep their order.
pub fn dedup_near_duplicates(pairs: Vec<ClaimPair>, max_ratio: f64) -> Vec<ClaimPair> {
    pairs
        .into_iter()
        .filter(|pair| !exceeds(&pair.input_claim, &pair.verified_claim, max_ratio))
        .collect()
}

fn exceeds(a: &str, b: &str, max_ratio: f64) -> bool {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0 > max_ratio;
    }
    // d >= ||a| - |b||, so the ratio is bounded above by min/max.
    let upper = 1.0 - (longest - a.len().min(b.len())) as f64 / longest as f64;
    if upper <= max_ratio {
        return false;
    }
    ratio_chars(&a, &b) > max_ratio
}
