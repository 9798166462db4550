use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::quality::Polarity;
use crate::stereo_image::StereoPair;

use super::correlation::average_ranks;
use super::voter::Voter;

/// rankMOS assigned to every version of a reference whose rank scores all tie.
pub const TIED_RANKMOS: f64 = 5.5;
pub const RANKMOS_MIN: f64 = 1.0;
pub const RANKMOS_MAX: f64 = 10.0;

/// Raw voter scores `v[i][j][k]` and, once ordered, rank scores `S[i][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    n_refs: usize,
    n_versions: usize,
    voter_names: Vec<String>,
    polarities: Vec<Polarity>,
    raw: Vec<f64>,
    ranks: Option<Vec<f64>>,
}

impl VoteTable {
    /// Build from raw scores laid out `[(i * J + j) * K + k]`.
    pub fn from_raw(
        n_refs: usize,
        n_versions: usize,
        voters: Vec<(String, Polarity)>,
        raw: Vec<f64>,
    ) -> Result<Self> {
        let k = voters.len();
        if raw.len() != n_refs * n_versions * k {
            return Err(Error::shape(
                "vote table",
                format!("{n_refs}x{n_versions}x{k} table needs {} scores, got {}", n_refs * n_versions * k, raw.len()),
            ));
        }
        let (voter_names, polarities) = voters.into_iter().unzip();
        Ok(Self {
            n_refs,
            n_versions,
            voter_names,
            polarities,
            raw,
            ranks: None,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_refs, self.n_versions, self.voter_names.len())
    }

    fn at(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_versions + j) * self.voter_names.len() + k
    }

    pub fn raw(&self, i: usize, j: usize, k: usize) -> f64 {
        self.raw[self.at(i, j, k)]
    }

    pub fn rank(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        self.ranks.as_ref().map(|r| r[self.at(i, j, k)])
    }

    pub fn voter_names(&self) -> &[String] {
        &self.voter_names
    }

    pub fn polarities(&self) -> &[Polarity] {
        &self.polarities
    }

    pub fn is_ordered(&self) -> bool {
        self.ranks.is_some()
    }

    /// `ref,version,voter,raw,rank` (rank empty before ordering).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["ref", "version", "voter", "raw", "rank"])?;
        let (n, j_count, k_count) = self.dims();
        for i in 0..n {
            for j in 0..j_count {
                for k in 0..k_count {
                    let rank = self.rank(i, j, k).map(|r| r.to_string()).unwrap_or_default();
                    wr.write_record([
                        i.to_string(),
                        j.to_string(),
                        self.voter_names[k].clone(),
                        self.raw(i, j, k).to_string(),
                        rank,
                    ])?;
                }
            }
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Score every version of every reference with every voter.
pub fn vote(refs: &[StereoPair], versions: &[Vec<StereoPair>], voters: &[&dyn Voter]) -> Result<VoteTable> {
    if voters.is_empty() {
        return Err(Error::invalid("at least one voter is required"));
    }
    if refs.len() != versions.len() || refs.is_empty() {
        return Err(Error::invalid(format!(
            "{} references but {} version lists",
            refs.len(),
            versions.len()
        )));
    }
    let j_count = versions[0].len();
    if j_count < 2 || versions.iter().any(|v| v.len() != j_count) {
        return Err(Error::invalid(
            "every reference needs the same number (>= 2) of versions",
        ));
    }
    // Cells are independent; score them across threads, then collect in
    // (i, j) order so the table is identical to a sequential pass.
    let cells: Vec<(usize, usize)> = (0..refs.len()).flat_map(|i| (0..j_count).map(move |j| (i, j))).collect();
    let score_cell = |&(i, j): &(usize, usize)| -> Result<Vec<f64>> {
        voters
            .iter()
            .enumerate()
            .map(|(k, voter)| {
                voter.score(&versions[i][j], &refs[i]).map_err(|e| Error::Voter {
                    reference: i,
                    version: j,
                    voter_index: k,
                    voter: voter.name().to_string(),
                    source: Box::new(e),
                })
            })
            .collect()
    };
    let results = crate::parallel::par_map(&cells, score_cell);
    let mut raw = Vec::with_capacity(cells.len() * voters.len());
    for r in results {
        raw.extend(r?);
    }
    VoteTable::from_raw(
        refs.len(),
        j_count,
        voters.iter().map(|v| (v.name().to_string(), v.polarity())).collect(),
        raw,
    )
}

/// Per (reference, voter): rank versions worst (1) to best (J), honoring the
/// voter's polarity; ties share the average of their positions.
pub fn order(table: &VoteTable) -> Result<VoteTable> {
    let (n, j_count, k_count) = table.dims();
    let mut ranks = vec![0.0; table.raw.len()];
    for i in 0..n {
        for k in 0..k_count {
            let goodness: Vec<f64> = (0..j_count)
                .map(|j| {
                    let v = table.raw(i, j, k);
                    if v.is_nan() {
                        return Err(Error::NonFinite(format!(
                            "NaN score at ref {i}, version {j}, voter '{}'",
                            table.voter_names[k]
                        )));
                    }
                    Ok(match table.polarities[k] {
                        Polarity::HigherBetter => v,
                        Polarity::LowerBetter => -v,
                    })
                })
                .collect::<Result<_>>()?;
            for (j, r) in average_ranks(&goodness)?.into_iter().enumerate() {
                ranks[table.at(i, j, k)] = r;
            }
        }
    }
    Ok(VoteTable {
        ranks: Some(ranks),
        ..table.clone()
    })
}

/// Range over which [`merge`] stretches RS onto [1, 10].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormScope {
    /// Each reference's versions span [1, 10] on their own.
    #[default]
    PerReference,
    /// One affine map over the whole database.
    Global,
}

/// Mean rank score `RS[i][j]` and the final `rankMOS[i][j]` in [1, 10].
#[derive(Debug, Clone, PartialEq)]
pub struct RankMosTable {
    n_refs: usize,
    n_versions: usize,
    rs: Vec<f64>,
    rankmos: Vec<f64>,
}

impl RankMosTable {
    pub fn new(n_refs: usize, n_versions: usize, rs: Vec<f64>, rankmos: Vec<f64>) -> Result<Self> {
        if rs.len() != n_refs * n_versions || rankmos.len() != rs.len() {
            return Err(Error::shape("rankMOS table", "length does not match dims"));
        }
        Ok(Self {
            n_refs,
            n_versions,
            rs,
            rankmos,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_refs, self.n_versions)
    }

    pub fn rs(&self, i: usize, j: usize) -> f64 {
        self.rs[i * self.n_versions + j]
    }

    pub fn rankmos(&self, i: usize, j: usize) -> f64 {
        self.rankmos[i * self.n_versions + j]
    }

    /// rankMOS of every version of reference `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rankmos[i * self.n_versions..(i + 1) * self.n_versions]
    }

    pub fn values(&self) -> &[f64] {
        &self.rankmos
    }

    /// `ref,version,RS,rankMOS`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["ref", "version", "RS", "rankMOS"])?;
        for i in 0..self.n_refs {
            for j in 0..self.n_versions {
                wr.write_record([
                    i.to_string(),
                    j.to_string(),
                    self.rs(i, j).to_string(),
                    self.rankmos(i, j).to_string(),
                ])?;
            }
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
            let parse_err = |what: &str| {
                Error::invalid(format!("rankMOS CSV line {}: bad {what}", rec.position().map_or(0, |p| p.line())))
            };
            rows.push((
                field(0).parse().map_err(|_| parse_err("ref"))?,
                field(1).parse().map_err(|_| parse_err("version"))?,
                field(2).parse().map_err(|_| parse_err("RS"))?,
                field(3).parse().map_err(|_| parse_err("rankMOS"))?,
            ));
        }
        let n_refs = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n_versions = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != n_refs * n_versions {
            return Err(Error::invalid(format!(
                "rankMOS CSV has {} rows for a {n_refs}x{n_versions} table",
                rows.len()
            )));
        }
        let mut rs = vec![f64::NAN; rows.len()];
        let mut mos = vec![f64::NAN; rows.len()];
        for (i, j, a, b) in rows {
            rs[i * n_versions + j] = a;
            mos[i * n_versions + j] = b;
        }
        if mos.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("rankMOS CSV has duplicate or missing cells"));
        }
        Self::new(n_refs, n_versions, rs, mos)
    }
}

/// Average the rank scores over voters and stretch affinely onto [1, 10].
pub fn merge(table: &VoteTable, scope: NormScope) -> Result<RankMosTable> {
    let (n, j_count, k_count) = table.dims();
    let ranks = table
        .ranks
        .as_ref()
        .ok_or_else(|| Error::invalid("merge needs an ordered vote table"))?;
    // Rank sums are exact (half-integers), so normalizing them rather than
    // their means keeps the affine map exact on hand-checkable cases.
    let sums: Vec<f64> = ranks.chunks_exact(k_count).map(|c| c.iter().sum()).collect();
    let rs: Vec<f64> = sums.iter().map(|s| s / k_count as f64).collect();
    let stretch = |vals: &[f64]| -> Vec<f64> {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            return vec![TIED_RANKMOS; vals.len()];
        }
        vals.iter()
            .map(|v| RANKMOS_MIN + (RANKMOS_MAX - RANKMOS_MIN) * ((v - lo) / (hi - lo)))
            .collect()
    };
    let rankmos = match scope {
        NormScope::PerReference => sums.chunks_exact(j_count).flat_map(stretch).collect(),
        NormScope::Global => stretch(&sums),
    };
    RankMosTable::new(n, j_count, rs, rankmos)
}

/// Voting, ordering and merging in one call.
pub fn synthesize_rankmos(
    refs: &[StereoPair],
    versions: &[Vec<StereoPair>],
    voters: &[&dyn Voter],
    scope: NormScope,
) -> Result<(VoteTable, RankMosTable)> {
    let ordered = order(&vote(refs, versions, voters)?)?;
    let mos = merge(&ordered, scope)?;
    Ok((ordered, mos))
}
