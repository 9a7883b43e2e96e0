//! Assignment of secure comb pairs to the links of a fully connected
//! entanglement-distribution network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qkd::LinkMetrics;

/// Pair indices of the secure links, best sifted rate first, ties broken by
/// ascending pair index.
pub fn usable_pairs(metrics: &[LinkMetrics]) -> Vec<u32> {
    let mut usable: Vec<&LinkMetrics> = metrics.iter().filter(|m| m.secure).collect();
    usable.sort_by(|a, b| {
        f64::total_cmp(&b.sifted_bps, &a.sifted_bps).then(a.pair_index.cmp(&b.pair_index))
    });
    usable.iter().map(|m| m.pair_index).collect()
}

/// Largest user count N with N(N-1)/2 links coverable by the usable pairs;
/// at least 1.
pub fn max_users(usable_count: usize) -> usize {
    let mut n = 1usize;
    while (n + 1) * n / 2 <= usable_count {
        n += 1;
    }
    n
}

/// One assigned link of the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLink {
    pub a: String,
    pub b: String,
    pub n: u32,
    pub sifted_bps: f64,
}

/// A fully connected allocation: every unordered user pair gets exactly one
/// comb pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkPlan {
    pub users: Vec<String>,
    pub links: Vec<PlanLink>,
    pub unused: Vec<u32>,
    pub max_users: usize,
}

impl NetworkPlan {
    pub fn validate(&self) -> Result<()> {
        let n = self.users.len();
        if self.links.len() != n * (n - 1) / 2 {
            return Err(Error::Validation(format!(
                "{} links do not cover {} users",
                self.links.len(),
                n
            )));
        }
        let mut seen_pairs = std::collections::BTreeSet::new();
        let mut seen_links = std::collections::BTreeSet::new();
        for link in &self.links {
            if !seen_pairs.insert(link.n) {
                return Err(Error::Validation(format!(
                    "comb pair {} assigned twice",
                    link.n
                )));
            }
            let key = if link.a <= link.b {
                (link.a.clone(), link.b.clone())
            } else {
                (link.b.clone(), link.a.clone())
            };
            if !seen_links.insert(key) {
                return Err(Error::Validation(format!(
                    "user pair ({}, {}) linked twice",
                    link.a, link.b
                )));
            }
        }
        Ok(())
    }
}

fn user_name(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("U{}", i + 1)
    }
}

/// Assign the best usable pairs to user links in lexicographic link order.
///
/// `usable` must already be filtered to secure pairs and sorted best-first
/// (see [`usable_pairs`]); the allocation is deterministic.
pub fn allocate(usable: &[LinkMetrics], n_users: usize) -> Result<NetworkPlan> {
    if n_users < 2 {
        return Err(Error::invalid_input(format!(
            "a network needs at least 2 users, got {n_users}"
        )));
    }
    let needed = n_users * (n_users - 1) / 2;
    if usable.len() < needed {
        return Err(Error::Capacity {
            users: n_users,
            needed,
            available: usable.len(),
        });
    }
    let users: Vec<String> = (0..n_users).map(user_name).collect();
    let mut links = Vec::with_capacity(needed);
    let mut next = usable.iter();
    for a in 0..n_users {
        for b in (a + 1)..n_users {
            let m = next.next().expect("capacity checked above");
            links.push(PlanLink {
                a: users[a].clone(),
                b: users[b].clone(),
                n: m.pair_index,
                sifted_bps: m.sifted_bps,
            });
        }
    }
    let unused = usable[needed..].iter().map(|m| m.pair_index).collect();
    let plan = NetworkPlan {
        users,
        links,
        unused,
        max_users: max_users(usable.len()),
    };
    plan.validate()?;
    Ok(plan)
}

/// Check that simultaneously active qubit blocks leave at least
/// `guard_modes` unused modes between them.
pub fn validate_guard_spacing(bases: &[u32], guard_modes: u32) -> Result<()> {
    let mut sorted: Vec<u32> = bases.to_vec();
    sorted.sort_unstable();
    for pair in sorted.windows(2) {
        if pair[1] - pair[0] < 2 + guard_modes {
            return Err(Error::Layout(format!(
                "qubit blocks at bases {} and {} leave fewer than {} guard modes",
                pair[0], pair[1], guard_modes
            )));
        }
    }
    Ok(())
}
