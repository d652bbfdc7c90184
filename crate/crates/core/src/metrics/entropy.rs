//! Position-wise character/attribute statistics and the entropy metrics built
//! on them (synonymy, homonymy, word-order freedom).
//!
//! Labels are right-padded with [`PAD`] to the longest label in the corpus.
//! For each position `p` we tabulate joint counts of (character, attribute
//! value) and the plug-in mutual information `MI_p`. The position carrying the
//! most information about the attribute (`p*`, smallest on ties) is where the
//! attribute is considered encoded.

use std::collections::{BTreeMap, BTreeSet};

use super::{Corpus, Metric, MetricError};
use crate::language::{alphabet_size, Attribute, PAD};

/// Entropy metrics configuration (`metric-spec v1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyConfig {
    /// Size of the symbol inventory used to normalize synonymy. The effective
    /// inventory is never smaller than the number of symbols in the corpus.
    pub symbol_inventory: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig { symbol_inventory: alphabet_size() + 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionStats {
    /// Joint counts keyed by (character, value index).
    pub counts: BTreeMap<(char, usize), usize>,
    /// Plug-in mutual information in nats.
    pub mi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormStats {
    pub attribute: Attribute,
    pub length: usize,
    pub positions: Vec<PositionStats>,
    pub best_position: usize,
    /// Distinct symbols (padding included) across all positions.
    pub symbols: usize,
    pub total: usize,
}

const MI_TIE_EPS: f64 = 1e-12;

pub(crate) fn entropy_of_counts<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p.ln()
        })
        .sum::<f64>()
}

fn padded(corpus: &Corpus) -> (usize, Vec<Vec<char>>) {
    let length = corpus.labels().map(|l| l.char_len()).max().unwrap_or(0);
    let rows = corpus
        .labels()
        .map(|l| {
            let mut cs: Vec<char> = l.as_str().chars().collect();
            cs.resize(length, PAD);
            cs
        })
        .collect();
    (length, rows)
}

fn mutual_information(counts: &BTreeMap<(char, usize), usize>, total: usize) -> f64 {
    let mut by_char: BTreeMap<char, usize> = BTreeMap::new();
    let mut by_value: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(c, v), &n) in counts {
        *by_char.entry(c).or_default() += n;
        *by_value.entry(v).or_default() += n;
    }
    let t = total as f64;
    let mi: f64 = counts
        .iter()
        .map(|(&(c, v), &n)| {
            let ratio = (n * total) as f64 / (by_char[&c] * by_value[&v]) as f64;
            n as f64 / t * ratio.ln()
        })
        .sum();
    mi.max(0.0)
}

/// Tabulates position-wise counts and mutual information for one attribute.
pub fn form_stats(corpus: &Corpus, attribute: Attribute) -> Result<FormStats, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let (length, rows) = padded(corpus);
    let values: Vec<usize> = corpus.meanings().map(|m| m.value_index(attribute)).collect();
    let mut symbols = BTreeSet::new();
    let mut positions = Vec::with_capacity(length);
    for p in 0..length {
        let mut counts = BTreeMap::new();
        for (row, &v) in rows.iter().zip(&values) {
            *counts.entry((row[p], v)).or_insert(0usize) += 1;
            symbols.insert(row[p]);
        }
        let mi = mutual_information(&counts, corpus.len());
        positions.push(PositionStats { counts, mi });
    }
    let mut best_position = 0;
    for (p, stats) in positions.iter().enumerate() {
        if stats.mi > positions[best_position].mi + MI_TIE_EPS {
            best_position = p;
        }
    }
    Ok(FormStats {
        attribute,
        length,
        positions,
        best_position,
        symbols: symbols.len(),
        total: corpus.len(),
    })
}

/// Mean conditional entropy of the character at `p*` given each observed
/// attribute value, normalized by the log inventory size.
pub fn synonymy_for(corpus: &Corpus, attribute: Attribute, cfg: &EntropyConfig) -> Result<f64, MetricError> {
    let fs = form_stats(corpus, attribute)?;
    let counts = &fs.positions[fs.best_position].counts;
    let mut per_value: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&(_, v), &n) in counts {
        per_value.entry(v).or_default().push(n);
    }
    let inventory = cfg.symbol_inventory.max(fs.symbols);
    if inventory < 2 {
        return Ok(0.0);
    }
    let h: f64 = per_value.values().map(|ns| entropy_of_counts(ns.iter().copied())).sum::<f64>()
        / per_value.len() as f64;
    Ok((h / (inventory as f64).ln()).clamp(0.0, 1.0))
}

/// Expected entropy of the attribute value given the character at `p*`,
/// normalized by log of the attribute cardinality.
pub fn homonymy_for(corpus: &Corpus, attribute: Attribute) -> Result<f64, MetricError> {
    let fs = form_stats(corpus, attribute)?;
    let counts = &fs.positions[fs.best_position].counts;
    let mut per_char: BTreeMap<char, Vec<usize>> = BTreeMap::new();
    for (&(c, _), &n) in counts {
        per_char.entry(c).or_default().push(n);
    }
    let t = fs.total as f64;
    let h: f64 = per_char
        .values()
        .map(|ns| {
            let weight = ns.iter().sum::<usize>() as f64 / t;
            weight * entropy_of_counts(ns.iter().copied())
        })
        .sum();
    Ok((h / (Attribute::CARDINALITY as f64).ln()).clamp(0.0, 1.0))
}

/// Entropy of the normalized MI profile over positions, divided by log of the
/// padded length. `None` when no position carries information.
pub fn freedom_for(corpus: &Corpus, attribute: Attribute) -> Result<Option<f64>, MetricError> {
    let fs = form_stats(corpus, attribute)?;
    let total_mi: f64 = fs.positions.iter().map(|p| p.mi).sum();
    if total_mi <= MI_TIE_EPS {
        return Ok(None);
    }
    if fs.length < 2 {
        return Ok(Some(0.0));
    }
    let h: f64 = -fs
        .positions
        .iter()
        .map(|p| p.mi / total_mi)
        .filter(|&w| w > 0.0)
        .map(|w| w * w.ln())
        .sum::<f64>();
    Ok(Some((h / (fs.length as f64).ln()).clamp(0.0, 1.0)))
}

pub fn synonymy(corpus: &Corpus, cfg: &EntropyConfig) -> Result<Metric, MetricError> {
    let vals = Attribute::ALL
        .iter()
        .map(|&a| synonymy_for(corpus, a, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Metric::defined(super::value::mean(&vals)))
}

pub fn homonymy(corpus: &Corpus) -> Result<Metric, MetricError> {
    let vals = Attribute::ALL
        .iter()
        .map(|&a| homonymy_for(corpus, a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Metric::defined(super::value::mean(&vals)))
}

/// Mean freedom over the attributes for which it is defined.
pub fn word_order_freedom(corpus: &Corpus) -> Result<Metric, MetricError> {
    let mut vals = Vec::new();
    for a in Attribute::ALL {
        if let Some(v) = freedom_for(corpus, a)? {
            vals.push(v);
        }
    }
    if vals.is_empty() {
        return Ok(Metric::null());
    }
    Ok(Metric::defined(super::value::mean(&vals)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::{enumerate_meanings, Label, Meaning};

    fn lab(s: &str) -> Label {
        Label::new(s).unwrap()
    }

    fn compositional() -> Corpus {
        let table = [['t', 'k', 'p'], ['o', 'a', 'e'], ['s', 'n', 'w']];
        Corpus::new(
            enumerate_meanings()
                .into_iter()
                .map(|m| {
                    let [s, c, a] = m.indices();
                    (m, lab(&[table[0][s], table[1][c], table[2][a]].iter().collect::<String>()))
                })
                .collect(),
        )
    }

    #[test]
    fn compositional_mi_concentrates_at_slot() {
        let c = compositional();
        for (slot, attr) in Attribute::ALL.iter().enumerate() {
            let fs = form_stats(&c, *attr).unwrap();
            assert_eq!(fs.best_position, slot);
            assert!((fs.positions[slot].mi - 3f64.ln()).abs() < 1e-12);
            for (p, ps) in fs.positions.iter().enumerate() {
                if p != slot {
                    assert!(ps.mi.abs() < 1e-12);
                }
            }
        }
        let cfg = EntropyConfig::default();
        assert!(synonymy(&c, &cfg).unwrap().value.unwrap().abs() < 1e-12);
        assert!(homonymy(&c).unwrap().value.unwrap().abs() < 1e-12);
        assert!(word_order_freedom(&c).unwrap().value.unwrap().abs() < 1e-12);
    }

    #[test]
    fn identical_labels_carry_no_information() {
        let c = Corpus::new(enumerate_meanings().into_iter().map(|m| (m, lab("pufe"))).collect());
        for attr in Attribute::ALL {
            let fs = form_stats(&c, attr).unwrap();
            assert!(fs.positions.iter().all(|p| p.mi == 0.0));
        }
        assert_eq!(word_order_freedom(&c).unwrap(), Metric::null());
    }

    #[test]
    fn two_item_counts() {
        let ms = enumerate_meanings();
        // (1,orange,1) and (1,orange,2)
        let c = Corpus::new(vec![(ms[0], lab("wa")), (ms[1], lab("wak"))]);
        let fs = form_stats(&c, Attribute::Amount).unwrap();
        assert_eq!(fs.length, 3);
        let last = &fs.positions[2].counts;
        assert_eq!(last.get(&(PAD, 0)), Some(&1));
        assert_eq!(last.get(&('k', 1)), Some(&1));
        assert_eq!(fs.positions[0].counts.get(&('w', 0)), Some(&1));
        assert_eq!(fs.positions[0].counts.get(&('w', 1)), Some(&1));
        assert_eq!(fs.best_position, 2);
        assert!((fs.positions[2].mi - 2f64.ln()).abs() < 1e-12);
    }

    /// Shape encoded at position 0 by two equiprobable characters per value.
    fn synonym_corpus() -> Corpus {
        let chars = [['a', 'b'], ['c', 'd'], ['e', 'f']];
        let mut pairs = Vec::new();
        for m in enumerate_meanings() {
            let s = m.value_index(Attribute::Shape);
            let k = (m.value_index(Attribute::Colour) + m.value_index(Attribute::Amount)) % 2;
            // Balance the two synonyms: 9 items per shape, pad with a tenth row below.
            pairs.push((m, lab(&chars[s][k].to_string())));
        }
        // Add one extra row per shape on the minority synonym to reach 5/5.
        for s in 0..3u8 {
            let m = Meaning::from_indices([usize::from(s), 0, 1]);
            pairs.push((m, lab(&chars[usize::from(s)][1].to_string())));
        }
        Corpus::new(pairs)
    }

    #[test]
    fn synonymy_of_two_equiprobable_synonyms() {
        let c = synonym_corpus();
        let cfg = EntropyConfig { symbol_inventory: 41 };
        let v = synonymy_for(&c, Attribute::Shape, &cfg).unwrap();
        // ln 2 / ln 41
        assert!((v - 0.186_653_4).abs() < 1e-6, "{v}");
        assert!((v - 2f64.ln() / 41f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn synonymy_uniform_over_inventory_is_one() {
        // Each shape value uses each of 6 symbols equally; inventory is 6.
        let symbols = ['a', 'b', 'c', 'd', 'e', 'f'];
        let mut pairs = Vec::new();
        for s in 0..3 {
            for (k, ch) in symbols.iter().enumerate() {
                pairs.push((Meaning::from_indices([s, k % 3, (k / 3) % 3]), lab(&ch.to_string())));
            }
        }
        let c = Corpus::new(pairs);
        let v = synonymy_for(&c, Attribute::Shape, &EntropyConfig { symbol_inventory: 6 }).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn homonymy_examples() {
        // one char for all three values equally
        let mut pairs = Vec::new();
        for s in 0..3 {
            pairs.push((Meaning::from_indices([s, 0, 0]), lab("k")));
        }
        assert!((homonymy_for(&Corpus::new(pairs), Attribute::Shape).unwrap() - 1.0).abs() < 1e-12);

        // 'a' -> shape 0, 'b' -> shapes 1 and 2 equally ... weight of 'b' is 2/3.
        // Use 'a' for 0 and 1 (ambiguous, weight 1/3 of 6 items), unique chars otherwise.
        let pairs = vec![
            (Meaning::from_indices([0, 0, 0]), lab("a")),
            (Meaning::from_indices([1, 0, 0]), lab("a")),
            (Meaning::from_indices([0, 1, 0]), lab("b")),
            (Meaning::from_indices([0, 2, 0]), lab("b")),
            (Meaning::from_indices([1, 1, 0]), lab("c")),
            (Meaning::from_indices([2, 0, 0]), lab("d")),
        ];
        let c = Corpus::new(pairs);
        let fs = form_stats(&c, Attribute::Shape).unwrap();
        assert_eq!(fs.best_position, 0);
        let v = homonymy_for(&c, Attribute::Shape).unwrap();
        assert!((v - (1.0 / 3.0) * 2f64.ln() / 3f64.ln()).abs() < 1e-12, "{v}");
        assert!((v - 0.2103).abs() < 1e-4);
    }

    #[test]
    fn freedom_two_of_four_positions() {
        // Shape encoded at position 0 for half the items and at position 2 for
        // the other half, with symmetric filler, giving equal MI at 2 of 4 slots.
        let code = ['a', 'b', 'c'];
        let mut pairs = Vec::new();
        for (s, ch) in code.iter().enumerate() {
            pairs.push((Meaning::from_indices([s, 0, 0]), lab(&format!("{ch}xyx"))));
            pairs.push((Meaning::from_indices([s, 1, 0]), lab(&format!("xy{ch}x"))));
        }
        let c = Corpus::new(pairs);
        let fs = form_stats(&c, Attribute::Shape).unwrap();
        assert!((fs.positions[0].mi - fs.positions[2].mi).abs() < 1e-12);
        assert!(fs.positions[1].mi.abs() < 1e-12 && fs.positions[3].mi.abs() < 1e-12);
        let v = freedom_for(&c, Attribute::Shape).unwrap().unwrap();
        assert!((v - 0.5).abs() < 1e-12, "{v}");
    }
}
