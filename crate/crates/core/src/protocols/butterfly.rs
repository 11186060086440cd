use super::ParamError;

fn place(b: u32, h: u32, level: u32) -> u32 {
    b.pow(h - 1 - level)
}

/// The `level`-th most significant base-`b` digit (1-based) of a node id among
/// `B^{H−1}` nodes.
pub fn butterfly_digit(node: u32, level: u32, b: u32, h: u32) -> u32 {
    (node / place(b, h, level)) % b
}

fn set_digit(node: u32, level: u32, value: u32, b: u32, h: u32) -> u32 {
    let pv = place(b, h, level);
    node - butterfly_digit(node, level, b, h) * pv + value * pv
}

/// Digit-fixing route `W_1 … W_H` from `entry` to `exit`: step ℓ sets the
/// ℓ-th most significant digit to `exit`'s.
pub fn butterfly_path(entry: u32, exit: u32, b: u32, h: u32) -> Result<Vec<u32>, ParamError> {
    if b < 2 || h < 2 {
        return Err(ParamError::Invalid {
            field: "branching",
            reason: "B ≥ 2 and H ≥ 2 are required".into(),
        });
    }
    let nodes = b.checked_pow(h - 1).ok_or(ParamError::Invalid {
        field: "height",
        reason: "B^(H−1) overflows".into(),
    })?;
    if entry >= nodes || exit >= nodes {
        return Err(ParamError::Invalid {
            field: "butterfly",
            reason: format!("entry {entry} / exit {exit} outside [0, {nodes})"),
        });
    }
    let mut path = Vec::with_capacity(h as usize);
    let mut w = entry;
    path.push(w);
    for level in 1..h {
        w = set_digit(w, level, butterfly_digit(exit, level, b, h), b, h);
        path.push(w);
    }
    Ok(path)
}

/// The `B` nodes `node` can reach from level `level`.
pub fn butterfly_neighbors(node: u32, level: u32, b: u32, h: u32) -> impl Iterator<Item = u32> {
    (0..b).map(move |v| set_digit(node, level, v, b, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        assert_eq!(butterfly_path(0, 5, 2, 4).unwrap(), vec![0, 4, 4, 5]);
        assert_eq!(butterfly_path(6, 6, 2, 4).unwrap(), vec![6; 4]);
        assert!(butterfly_path(8, 0, 2, 4).is_err());
    }

    #[test]
    fn every_step_is_a_butterfly_edge() {
        for (b, h) in [(2u32, 4u32), (3, 3), (4, 4), (8, 3)] {
            let nodes = b.pow(h - 1);
            for entry in 0..nodes {
                for exit in 0..nodes {
                    let p = butterfly_path(entry, exit, b, h).unwrap();
                    assert_eq!(p.len(), h as usize);
                    assert_eq!((p[0], p[h as usize - 1]), (entry, exit));
                    for level in 1..h {
                        let (u, v) = (p[level as usize - 1], p[level as usize]);
                        assert!(butterfly_neighbors(u, level, b, h).any(|x| x == v));
                        let changed = (1..h)
                            .filter(|&l| butterfly_digit(u, l, b, h) != butterfly_digit(v, l, b, h))
                            .count();
                        assert!(changed <= 1);
                    }
                }
            }
        }
    }
}
