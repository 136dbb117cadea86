//! Latin squares for counterbalancing condition order.

/// `n × n` Latin square over `1..=n`. Even `n` uses the Williams
/// construction, in which every ordered pair of adjacent conditions occurs
/// exactly once. Odd `n` uses cyclic rows.
pub fn latin_square(n: usize) -> Vec<Vec<usize>> {
    if n % 2 == 1 {
        return (0..n).map(|i| (0..n).map(|j| (i + j) % n + 1).collect()).collect();
    }
    // first row 0, 1, n-1, 2, n-2, ...
    let mut first = Vec::with_capacity(n);
    let (mut lo, mut hi) = (1, n.saturating_sub(1));
    if n > 0 {
        first.push(0);
    }
    for j in 1..n {
        if j % 2 == 1 {
            first.push(lo);
            lo += 1;
        } else {
            first.push(hi);
            hi -= 1;
        }
    }
    (0..n)
        .map(|i| first.iter().map(|c| (c + i) % n + 1).collect())
        .collect()
}
