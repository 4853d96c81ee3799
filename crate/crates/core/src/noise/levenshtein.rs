use crate::error::{Error, Result};

/// Edit distance over Unicode scalar values (insert, delete, substitute; unit costs).
pub fn levenshtein_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 − distance / max(|a|, |b|)`, lengths in characters.
pub fn similarity(a: &str, b: &str) -> Result<f64> {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return Err(Error::Input(
            "similarity of two empty strings is undefined".into(),
        ));
    }
    Ok(1.0 - levenshtein_distance(a, b) as f64 / longest as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::{HashSet, VecDeque};

    /// Breadth-first search over single edits drawn from the union alphabet.
    /// Exact for the short strings it is used on.
    fn bfs_distance(a: &str, b: &str) -> usize {
        let alphabet: Vec<char> = {
            let mut s: Vec<char> = a.chars().chain(b.chars()).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let target: Vec<char> = b.chars().collect();
        let start: Vec<char> = a.chars().collect();
        let mut seen = HashSet::from([start.clone()]);
        let mut q = VecDeque::from([(start, 0usize)]);
        while let Some((s, d)) = q.pop_front() {
            if s == target {
                return d;
            }
            let mut next = Vec::new();
            for i in 0..=s.len() {
                for &c in &alphabet {
                    let mut t = s.clone();
                    t.insert(i, c);
                    next.push(t);
                }
                if i < s.len() {
                    let mut t = s.clone();
                    t.remove(i);
                    next.push(t);
                    for &c in &alphabet {
                        if c != s[i] {
                            let mut t = s.clone();
                            t[i] = c;
                            next.push(t);
                        }
                    }
                }
            }
            for t in next {
                if t.len() <= target.len().max(s.len()) + 1 && seen.insert(t.clone()) {
                    q.push_back((t, d + 1));
                }
            }
        }
        unreachable!("target is always reachable")
    }

    #[test]
    fn worked_examples() {
        assert_eq!(levenshtein_distance("editorial", "editorial"), 0);
        assert_eq!(levenshtein_distance("editorial", "editor1al"), 1);
        assert_eq!(levenshtein_distance("editorial", "ed1tur1al"), 3);
        assert_eq!(levenshtein_distance("editorial", "eo1t0r1al"), 4);
        assert_eq!(levenshtein_distance("", "abc"), 3);
        assert_eq!(levenshtein_distance("siège", "siege"), 1);
    }

    #[test]
    fn similarity_examples() {
        assert!((similarity("editorial", "editor1al").unwrap() - (1.0 - 1.0 / 9.0)).abs() < 1e-15);
        assert!((similarity("editorial", "ed1tur1al").unwrap() - (1.0 - 3.0 / 9.0)).abs() < 1e-15);
        assert!((similarity("editorial", "eo1t0r1al").unwrap() - (1.0 - 4.0 / 9.0)).abs() < 1e-15);
        assert_eq!(similarity("token", "token").unwrap(), 1.0);
        assert!(similarity("", "").is_err());
        assert_eq!(similarity("", "a").unwrap(), 0.0);
    }

    #[test]
    fn dp_matches_exhaustive_search_on_short_strings() {
        let alpha = ['a', 'b', 'c'];
        let mut words = Vec::new();
        for len in 0..=3u32 {
            for mut n in 0..3usize.pow(len) {
                let mut w = String::new();
                for _ in 0..len {
                    w.push(alpha[n % 3]);
                    n /= 3;
                }
                words.push(w);
            }
        }
        for a in &words {
            for b in &words {
                assert_eq!(
                    levenshtein_distance(a, b),
                    bfs_distance(a, b),
                    "{a:?} {b:?}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn dp_matches_bfs_up_to_length_five(a in "[abc]{0,5}", b in "[abc]{0,5}") {
            prop_assert_eq!(levenshtein_distance(&a, &b), bfs_distance(&a, &b));
        }

        #[test]
        fn metric_axioms(a in "[abc]{0,8}", b in "[abc]{0,8}", c in "[abc]{0,8}") {
            let ab = levenshtein_distance(&a, &b);
            prop_assert_eq!(ab, levenshtein_distance(&b, &a));
            prop_assert!(ab <= levenshtein_distance(&a, &c) + levenshtein_distance(&c, &b));
            prop_assert_eq!(ab == 0, a == b);
        }
    }
}
