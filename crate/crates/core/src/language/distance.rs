use super::Meaning;
use super::meaning::Attribute;

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
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

/// Edit distance divided by the longer length; two empty strings are at distance 0.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

/// Hamming distance over the three attributes.
pub fn meaning_distance(m1: &Meaning, m2: &Meaning) -> usize {
    Attribute::ALL
        .iter()
        .filter(|&&attr| m1.value_index(attr) != m2.value_index(attr))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::Colour;
    use proptest::prelude::*;

    #[test]
    fn edit_distance_examples() {
        assert_eq!(levenshtein("watopo", "watopo"), 0);
        assert_eq!(levenshtein("pufe", "pufepufe"), 4);
        assert_eq!(normalized_edit_distance("pufe", "pufepufe"), 0.5);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(normalized_edit_distance("", ""), 0.0);
    }

    #[test]
    fn meaning_distance_examples() {
        let m = |s, c, a| Meaning::new(s, c, a).unwrap();
        assert_eq!(meaning_distance(&m(1, Colour::Blue, 1), &m(1, Colour::Blue, 1)), 0);
        assert_eq!(meaning_distance(&m(1, Colour::Blue, 1), &m(1, Colour::Blue, 3)), 1);
        assert_eq!(meaning_distance(&m(1, Colour::Blue, 1), &m(2, Colour::Green, 3)), 3);
    }

    fn word() -> impl Strategy<Value = String> {
        "[wtpsnkgfaeiou]{0,9}"
    }

    proptest! {
        #[test]
        fn edit_distance_is_a_metric(a in word(), b in word(), c in word()) {
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            if a != b {
                prop_assert!(levenshtein(&a, &b) > 0);
            }
            let n = normalized_edit_distance(&a, &b);
            prop_assert!((0.0..=1.0).contains(&n));
        }

        #[test]
        fn meaning_distance_is_a_metric(i in 0usize..27, j in 0usize..27, k in 0usize..27) {
            let all = crate::language::enumerate_meanings();
            let (x, y, z) = (all[i], all[j], all[k]);
            prop_assert_eq!(meaning_distance(&x, &y), meaning_distance(&y, &x));
            prop_assert_eq!(meaning_distance(&x, &y) == 0, x == y);
            prop_assert!(meaning_distance(&x, &z) <= meaning_distance(&x, &y) + meaning_distance(&y, &z));
        }
    }
}
