//! Largest-remainder apportionment, shared by the splitter and the class
//! budget allocator.

/// Splits `total` into integer parts proportional to `shares`.
///
/// Each part starts at `floor(total * share / sum)`; the leftover units go to
/// the largest fractional remainders, ties to the lower index. The parts
/// always sum to `total`. Zero shares receive zero.
pub fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    if shares.is_empty() || sum <= 0.0 {
        return vec![0; shares.len()];
    }
    let mut parts = Vec::with_capacity(shares.len());
    let mut remainders = Vec::with_capacity(shares.len());
    for (i, &share) in shares.iter().enumerate() {
        let exact = total as f64 * share / sum;
        // Guard the floor against values like 47.99999999 for an exact 48.
        let snapped = if (exact - exact.round()).abs() < 1e-9 {
            exact.round()
        } else {
            exact.floor()
        };
        parts.push(snapped as usize);
        remainders.push((i, exact - snapped));
    }
    let assigned: usize = parts.iter().sum();
    let mut leftover = total.saturating_sub(assigned);
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().cycle() {
        if leftover == 0 {
            break;
        }
        if shares[i] > 0.0 {
            parts[i] += 1;
            leftover -= 1;
        }
    }
    parts
}
