//! Lipman demonstration, assumption checks and hierarchy recovery reports.

use std::path::Path;

use crowdmean::aggregate::fmt_sig;
use crowdmean::hierarchy::{
    agreement_depth, build_lipman, depth_search_bound, full_info_posterior, hierarchies_equal_up_to,
    load_partition_model, rational_to_f64, TypeSpace,
};
use crowdmean::linalg::DEFAULT_RANK_TOL;
use crowdmean::model::AssumptionReport;
use crowdmean::structure_file::load_structure;
use crowdmean::Result;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::{Format, Table};

fn show(dist: &[BigRational]) -> String {
    dist.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn show_f64(dist: &[BigRational]) -> String {
    dist.iter().map(|x| fmt_sig(rational_to_f64(x))).collect::<Vec<_>>().join(" ")
}

fn kv_or_csv(format: Format, pairs: &[(&str, String)]) -> String {
    match format {
        Format::Kv => pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect(),
        Format::Csv => {
            let mut t = Table::new(&["key", "value"]);
            for (k, v) in pairs {
                t.push(vec![k.to_string(), v.clone()]);
            }
            t.to_csv()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipmanReport {
    pub order: usize,
    pub built_order: usize,
    pub x: BigRational,
    /// Largest order through which the base and shifted hierarchies agree;
    /// `None` if they agree through the whole search bound.
    pub agreement_depth: Option<usize>,
    pub search_bound: usize,
    pub equal_up_to_order: bool,
    pub mirror_equal_up_to_order: bool,
    pub posterior_base: Vec<BigRational>,
    pub posterior_shifted: Vec<BigRational>,
    pub posterior_mirror: Vec<BigRational>,
}

impl LipmanReport {
    /// Hierarchies agree through `order` and differ somewhere above it, yet
    /// pooled posteriors are as far apart as possible.
    pub fn identification_fails(&self) -> bool {
        let half = BigRational::new(1.into(), 2.into());
        let (zero, one) = (BigRational::zero(), BigRational::one());
        self.equal_up_to_order
            && self.mirror_equal_up_to_order
            && self.agreement_depth.is_some_and(|d| d >= self.order)
            && self.posterior_base == [half.clone(), half]
            && self.posterior_shifted == [zero.clone(), one.clone()]
            && self.posterior_mirror == [one, zero]
    }

    pub fn render(&self, format: Format) -> String {
        let depth = self
            .agreement_depth
            .map_or_else(|| format!("> {}", self.search_bound), |d| d.to_string());
        kv_or_csv(
            format,
            &[
                ("order", self.order.to_string()),
                ("built_order", self.built_order.to_string()),
                ("x", self.x.to_string()),
                ("agreement_depth", depth),
                ("equal_up_to_order", self.equal_up_to_order.to_string()),
                ("mirror_equal_up_to_order", self.mirror_equal_up_to_order.to_string()),
                ("posterior_base", show(&self.posterior_base)),
                ("posterior_shifted", show(&self.posterior_shifted)),
                ("posterior_mirror", show(&self.posterior_mirror)),
                ("identification_fails", self.identification_fails().to_string()),
            ],
        )
    }
}

pub fn run_lipman(m: usize) -> Result<LipmanReport> {
    let l = build_lipman(m)?;
    let bound = depth_search_bound(&l.mu, &l.mu_prime);
    Ok(LipmanReport {
        order: m,
        built_order: l.built_order,
        agreement_depth: agreement_depth(&l.mu, &l.profile_mu, &l.mu_prime, &l.profile_prime, bound)?,
        search_bound: bound,
        equal_up_to_order: hierarchies_equal_up_to(&l.mu, &l.profile_mu, &l.mu_prime, &l.profile_prime, m)?,
        mirror_equal_up_to_order: hierarchies_equal_up_to(&l.mu, &l.profile_mu, &l.mirror, &l.profile_mirror, m)?,
        posterior_base: full_info_posterior(&l.mu, &l.profile_mu)?,
        posterior_shifted: full_info_posterior(&l.mu_prime, &l.profile_prime)?,
        posterior_mirror: full_info_posterior(&l.mirror, &l.profile_mirror)?,
        x: l.x,
    })
}

pub const DEFAULT_DELTA: f64 = 0.05;

pub fn run_assumptions(path: &Path, delta: f64) -> Result<AssumptionReport> {
    load_structure(path)?.check_assumptions(delta, DEFAULT_RANK_TOL)
}

pub fn render_assumptions(r: &AssumptionReport, format: Format) -> String {
    let informative_pairs = r.informative.iter().flatten().filter(|b| **b).count();
    let total_pairs = r.informative.iter().map(Vec::len).sum::<usize>();
    match format {
        Format::Csv => {
            let mut t = Table::new(&["check", "value", "threshold", "pass"]);
            t.push(vec![
                "informative".into(),
                format!("{informative_pairs}/{total_pairs}"),
                String::new(),
                r.all_informative().to_string(),
            ]);
            t.push(vec![
                "tv_distance".into(),
                fmt_sig(r.min_tv_distance()),
                fmt_sig(r.delta),
                r.tv_bounded_below().to_string(),
            ]);
            t.push(vec![
                "distinct_means".into(),
                fmt_sig(r.distinct_means),
                fmt_sig(r.rank_tol),
                r.means_distinct().to_string(),
            ]);
            t.push(vec![
                "posterior_rank".into(),
                r.posterior_rank.to_string(),
                r.num_states.to_string(),
                r.full_rank().to_string(),
            ]);
            t.to_csv()
        }
        Format::Kv => {
            let mut out = String::new();
            out.push_str(&format!("informative = {}\n", r.all_informative()));
            for a in 0..r.num_states {
                for b in (a + 1)..r.num_states {
                    out.push_str(&format!("tv_distance.{a}.{b} = {}\n", fmt_sig(r.tv_distance[a][b])));
                }
            }
            out.push_str(&format!("delta = {}\n", fmt_sig(r.delta)));
            out.push_str(&format!("distinct_means = {}\n", fmt_sig(r.distinct_means)));
            out.push_str(&format!("posterior_rank = {}\n", r.posterior_rank));
            out.push_str(&format!("satisfied = {}\n", r.satisfied()));
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecovery {
    /// One cell index per player, 0-based.
    pub profile: Vec<usize>,
    pub types: Vec<u32>,
    pub recovered: Vec<BigRational>,
    pub oracle: Vec<BigRational>,
}

impl ProfileRecovery {
    pub fn matches(&self) -> bool {
        self.recovered == self.oracle
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub payoff_states: Vec<String>,
    pub profiles: Vec<ProfileRecovery>,
}

impl RecoveryReport {
    pub fn all_match(&self) -> bool {
        self.profiles.iter().all(ProfileRecovery::matches)
    }

    pub fn render(&self, format: Format) -> String {
        let join = |v: &[usize]| v.iter().map(|c| (c + 1).to_string()).collect::<Vec<_>>().join("-");
        let join_t = |v: &[u32]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("-");
        match format {
            Format::Csv => {
                let mut t = Table::new(&["cells", "types", "recovered", "recovered_approx", "pooled", "match"]);
                for p in &self.profiles {
                    t.push(vec![
                        join(&p.profile),
                        join_t(&p.types),
                        show(&p.recovered),
                        show_f64(&p.recovered),
                        show(&p.oracle),
                        p.matches().to_string(),
                    ]);
                }
                t.to_csv()
            }
            Format::Kv => {
                let mut out = format!("payoff_states = {}\n", self.payoff_states.join(" "));
                for p in &self.profiles {
                    let key = format!("profile.{}", join(&p.profile));
                    out.push_str(&format!("{key}.recovered = {}\n", show(&p.recovered)));
                    out.push_str(&format!("{key}.pooled = {}\n", show(&p.oracle)));
                    out.push_str(&format!("{key}.match = {}\n", p.matches()));
                }
                out.push_str(&format!("all_match = {}\n", self.all_match()));
                out
            }
        }
    }
}

/// Recovers the pooled posterior from the type profile at every
/// positive-probability cell profile and compares it with direct
/// conditioning on the cell intersection.
pub fn run_recover(path: &Path) -> Result<RecoveryReport> {
    let model = load_partition_model(path)?;
    let space = TypeSpace::from_model(&model)?;
    let profiles = model
        .positive_profiles()
        .into_iter()
        .map(|profile| {
            let types = space.profile_types(&profile)?;
            Ok(ProfileRecovery {
                recovered: space.recover(&types)?.posterior,
                oracle: full_info_posterior(&model, &profile)?,
                profile,
                types,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RecoveryReport {
        payoff_states: model.payoff_states().to_vec(),
        profiles,
    })
}
