//! A small model-formula language over tabular data:
//! `y ~ a + b + a:b + (1|g)`, with `a*b` expanding to `a + b + a:b`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{fit_random_intercept_lmm, Dataset, LmmFit, LmmOptions, StatsError};

/// Factor level used as the treatment-coding reference when present.
pub const PREFERRED_REFERENCE: &str = "hh";

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Factor(Vec<Option<String>>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Factor(v) => v.len(),
        }
    }

    fn is_missing(&self, i: usize) -> bool {
        match self {
            Column::Numeric(v) => v[i].is_none(),
            Column::Factor(v) => v[i].is_none(),
        }
    }

    fn key(&self, i: usize) -> Option<String> {
        match self {
            Column::Numeric(v) => v[i].map(|x| x.to_string()),
            Column::Factor(v) => v[i].clone(),
        }
    }
}

/// Named columns of equal length with missing values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataFrame {
    columns: BTreeMap<String, Column>,
    rows: usize,
}

fn is_missing_text(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "NaN" | "null" | "None")
}

impl DataFrame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn insert(&mut self, name: impl Into<String>, col: Column) -> Result<(), StatsError> {
        if !self.columns.is_empty() && col.len() != self.rows {
            return Err(StatsError::LengthMismatch(col.len(), self.rows));
        }
        self.rows = col.len();
        self.columns.insert(name.into(), col);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.get(name)
    }

    /// Reads a CSV with a header row. Columns whose non-missing cells all
    /// parse as numbers become numeric; the rest are factors.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, csv::Error> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (i, c) in cells.iter_mut().enumerate() {
                c.push(rec.get(i).unwrap_or("").to_string());
            }
        }
        let mut df = DataFrame::new();
        for (name, col) in headers.into_iter().zip(cells) {
            let numeric = col.iter().all(|s| is_missing_text(s) || s.trim().parse::<f64>().is_ok());
            let column = if numeric {
                Column::Numeric(col.iter().map(|s| s.trim().parse().ok().filter(|_| !is_missing_text(s))).collect())
            } else {
                Column::Factor(col.into_iter().map(|s| (!is_missing_text(&s)).then(|| s.trim().to_string())).collect())
            };
            df.insert(name, column).expect("csv columns have equal length");
        }
        Ok(df)
    }
}

/// A fixed-effect term: one variable or an interaction of several.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Term(pub Vec<String>);

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(":"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Formula {
    pub response: String,
    pub terms: Vec<Term>,
    pub group: String,
}

fn ident(s: &str) -> Result<String, StatsError> {
    let s = s.trim();
    if s.is_empty() || !s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
        return Err(StatsError::Formula(format!("bad variable name {s:?}")));
    }
    Ok(s.to_string())
}

impl Formula {
    pub fn parse(text: &str) -> Result<Self, StatsError> {
        let (lhs, rhs) = text.split_once('~').ok_or_else(|| StatsError::Formula("missing '~'".into()))?;
        let response = ident(lhs)?;
        let mut terms: Vec<Term> = Vec::new();
        let mut group = None;
        let push = |t: Term, terms: &mut Vec<Term>| {
            if !terms.contains(&t) {
                terms.push(t);
            }
        };
        for part in rhs.split('+') {
            let part = part.trim();
            if let Some(inner) = part.strip_prefix('(') {
                let inner = inner
                    .strip_suffix(')')
                    .ok_or_else(|| StatsError::Formula(format!("unclosed random term {part:?}")))?;
                let (one, g) = inner
                    .split_once('|')
                    .ok_or_else(|| StatsError::Formula(format!("random term needs '|': {part:?}")))?;
                if one.trim() != "1" {
                    return Err(StatsError::Formula("only random intercepts (1|g) are supported".into()));
                }
                if group.replace(ident(g)?).is_some() {
                    return Err(StatsError::Formula("exactly one random term is allowed".into()));
                }
            } else if part == "1" {
                continue;
            } else if part.contains('*') {
                let vars = part.split('*').map(ident).collect::<Result<Vec<_>, _>>()?;
                // all non-empty subsets, lower orders first
                let k = vars.len();
                let mut subsets: Vec<Vec<String>> = (1u32..(1 << k))
                    .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).map(|i| vars[i].clone()).collect())
                    .collect();
                subsets.sort_by_key(|s| s.len());
                for s in subsets {
                    push(Term(s), &mut terms);
                }
            } else if part.contains(':') {
                push(Term(part.split(':').map(ident).collect::<Result<_, _>>()?), &mut terms);
            } else {
                push(Term(vec![ident(part)?]), &mut terms);
            }
        }
        let group = group.ok_or_else(|| StatsError::Formula("a random intercept (1|g) is required".into()))?;
        Ok(Formula { response, terms, group })
    }

    fn variables(&self) -> Vec<&str> {
        let mut v: Vec<&str> = vec![&self.response, &self.group];
        for t in &self.terms {
            for name in &t.0 {
                if !v.contains(&name.as_str()) {
                    v.push(name);
                }
            }
        }
        v
    }

    /// Builds the design over complete rows. Returns the dataset and the
    /// number of rows dropped for missing values.
    pub fn design(&self, df: &DataFrame) -> Result<(Dataset, usize), StatsError> {
        let vars = self.variables();
        let mut cols = BTreeMap::new();
        for v in &vars {
            let c = df.column(v).ok_or_else(|| StatsError::Formula(format!("unknown column {v:?}")))?;
            cols.insert(*v, c);
        }
        let keep: Vec<usize> = (0..df.rows()).filter(|&i| cols.values().all(|c| !c.is_missing(i))).collect();
        let dropped = df.rows() - keep.len();

        let y = match cols[self.response.as_str()] {
            Column::Numeric(v) => keep.iter().map(|&i| v[i].expect("complete row")).collect::<Vec<_>>(),
            Column::Factor(_) => return Err(StatsError::Formula(format!("response {:?} is not numeric", self.response))),
        };
        let groups: Vec<String> =
            keep.iter().map(|&i| cols[self.group.as_str()].key(i).expect("complete row")).collect();

        // contrast columns per variable
        let mut expanded: BTreeMap<&str, Vec<(String, Vec<f64>)>> = BTreeMap::new();
        for t in &self.terms {
            for v in &t.0 {
                if expanded.contains_key(v.as_str()) {
                    continue;
                }
                let parts = match cols[v.as_str()] {
                    Column::Numeric(x) => vec![(v.clone(), keep.iter().map(|&i| x[i].expect("complete row")).collect())],
                    Column::Factor(x) => {
                        let mut levels: Vec<&str> = keep.iter().map(|&i| x[i].as_deref().expect("complete row")).collect();
                        levels.sort();
                        levels.dedup();
                        let reference =
                            if levels.contains(&PREFERRED_REFERENCE) { PREFERRED_REFERENCE } else { levels.first().copied().unwrap_or("") };
                        levels
                            .iter()
                            .filter(|l| **l != reference)
                            .map(|l| {
                                let ind = keep.iter().map(|&i| f64::from(x[i].as_deref() == Some(*l))).collect();
                                (format!("{v}[{l}]"), ind)
                            })
                            .collect()
                    }
                };
                expanded.insert(v.as_str(), parts);
            }
        }

        let n = keep.len();
        let mut names = vec!["(Intercept)".to_string()];
        let mut columns = vec![vec![1.0; n]];
        for t in &self.terms {
            let mut acc: Vec<(String, Vec<f64>)> = vec![(String::new(), vec![1.0; n])];
            for v in &t.0 {
                let mut next = Vec::new();
                for (an, av) in &acc {
                    for (bn, bv) in &expanded[v.as_str()] {
                        let name = if an.is_empty() { bn.clone() } else { format!("{an}:{bn}") };
                        next.push((name, av.iter().zip(bv).map(|(a, b)| a * b).collect()));
                    }
                }
                acc = next;
            }
            for (name, col) in acc {
                names.push(name);
                columns.push(col);
            }
        }
        let x = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
        Ok((Dataset::new(y, x, groups, names)?, dropped))
    }

    pub fn fit(&self, df: &DataFrame, opts: &LmmOptions) -> Result<ModelFit, StatsError> {
        let (data, dropped) = self.design(df)?;
        let fit = fit_random_intercept_lmm(&data, opts)?;
        Ok(ModelFit { formula: self.to_string(), fit, dropped })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.terms.iter().map(Term::to_string).collect();
        write!(f, "{} ~ {} + (1|{})", self.response, terms.join(" + "), self.group)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelFit {
    pub formula: String,
    pub fit: LmmFit,
    /// Rows left out for missing values.
    pub dropped: usize,
}
