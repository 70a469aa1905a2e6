//! UAI-format model, query and evidence files, plus benchmark generators.
//!
//! The model grammar is a whitespace-separated token stream: a network type
//! token (`MARKOV` or `BAYES`); the variable count; per-variable
//! cardinalities; the factor count; one scope block per factor (size, then
//! variable indices); then one table block per factor (entry count, then
//! probability-domain entries, last scope variable fastest). Zeros import as
//! the negative-infinity log sentinel.
//!
//! Query files hold a count followed by 0-based max-variable indices;
//! evidence files a count followed by `(variable, state)` pairs.

use crate::error::{Error, Result};
use crate::jgraph::{Factor, FactorModel};
use crate::model::{PairwiseModel, Role};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Tokens<'a> {
    toks: Vec<&'a str>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Tokens {
            toks: text.split_whitespace().collect(),
            pos: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let t = self.toks.get(self.pos).copied().ok_or_else(|| Error::Parse {
            token: self.pos,
            message: format!("unexpected end of input while reading {}", what),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let t = self.next(what)?;
        t.parse().map_err(|_| Error::Parse {
            token: self.pos - 1,
            message: format!("expected a nonnegative integer for {}, got '{}'", what, t),
        })
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let t = self.next(what)?;
        t.parse().map_err(|_| Error::Parse {
            token: self.pos - 1,
            message: format!("expected a number for {}, got '{}'", what, t),
        })
    }

    fn finished(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

/// Parse a UAI model document into a factor model (all variables default to
/// sum roles; apply a query to mark max variables).
pub fn parse_uai(text: &str) -> Result<FactorModel> {
    let mut t = Tokens::new(text);
    let kind = t.next("network type")?;
    if kind != "MARKOV" && kind != "BAYES" {
        return Err(Error::Parse {
            token: t.pos - 1,
            message: format!("network type must be MARKOV or BAYES, got '{}'", kind),
        });
    }
    let n = t.usize("variable count")?;
    let mut cards = Vec::with_capacity(n);
    for i in 0..n {
        let c = t.usize(&format!("cardinality of variable {}", i))?;
        if c == 0 {
            return Err(Error::Parse {
                token: t.pos - 1,
                message: format!("variable {} has cardinality 0", i),
            });
        }
        cards.push(c);
    }
    let nf = t.usize("factor count")?;
    let mut scopes = Vec::with_capacity(nf);
    for fi in 0..nf {
        let arity = t.usize(&format!("scope size of factor {}", fi))?;
        if arity == 0 {
            return Err(Error::Parse {
                token: t.pos - 1,
                message: format!("factor {} has empty scope", fi),
            });
        }
        let mut scope = Vec::with_capacity(arity);
        for k in 0..arity {
            let v = t.usize(&format!("scope index {} of factor {}", k, fi))?;
            if v >= n {
                return Err(Error::Parse {
                    token: t.pos - 1,
                    message: format!("factor {} references unknown variable {}", fi, v),
                });
            }
            scope.push(v);
        }
        scopes.push(scope);
    }
    let mut factors = Vec::with_capacity(nf);
    for (fi, scope) in scopes.into_iter().enumerate() {
        let count = t.usize(&format!("table size of factor {}", fi))?;
        let expect: usize = scope.iter().map(|&v| cards[v]).product();
        if count != expect {
            return Err(Error::Structural(format!(
                "factor {} table declares {} entries, scope implies {}",
                fi, count, expect
            )));
        }
        let mut table = Vec::with_capacity(count);
        for k in 0..count {
            let p = t.f64(&format!("entry {} of factor {}", k, fi))?;
            if p < 0.0 || !p.is_finite() {
                return Err(Error::Parse {
                    token: t.pos - 1,
                    message: format!("factor entries must be finite and nonnegative, got {}", p),
                });
            }
            table.push(if p == 0.0 { f64::NEG_INFINITY } else { p.ln() });
        }
        factors.push(Factor { scope, table });
    }
    let _ = t.finished(); // trailing tokens tolerated
    FactorModel::new(cards, vec![Role::Sum; n], factors)
}

/// Serialize a factor model to the UAI grammar (probability domain, 17
/// significant digits).
pub fn to_uai_string(fm: &FactorModel) -> String {
    let mut out = String::from("MARKOV\n");
    out.push_str(&format!("{}\n", fm.num_vars()));
    let cards: Vec<String> = fm.cards.iter().map(|c| c.to_string()).collect();
    out.push_str(&cards.join(" "));
    out.push('\n');
    out.push_str(&format!("{}\n", fm.factors.len()));
    for f in &fm.factors {
        let mut line = vec![f.scope.len().to_string()];
        line.extend(f.scope.iter().map(|v| v.to_string()));
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.push('\n');
    for f in &fm.factors {
        out.push_str(&format!("{}\n", f.table.len()));
        let entries: Vec<String> = f
            .table
            .iter()
            .map(|&t| {
                if t == f64::NEG_INFINITY {
                    "0".to_string()
                } else {
                    format!("{:.17e}", t.exp())
                }
            })
            .collect();
        out.push_str(&entries.join(" "));
        out.push('\n');
    }
    out
}

/// Parse a query file: a count then that many 0-based variable indices.
pub fn parse_query(text: &str, num_vars: usize) -> Result<Vec<usize>> {
    let mut t = Tokens::new(text);
    let n = t.usize("query count")?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let v = t.usize(&format!("query index {}", k))?;
        if v >= num_vars {
            return Err(Error::Parse {
                token: t.pos - 1,
                message: format!("query references unknown variable {}", v),
            });
        }
        if out.contains(&v) {
            return Err(Error::Parse {
                token: t.pos - 1,
                message: format!("query repeats variable {}", v),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Parse an evidence file: a count then `(variable, state)` pairs.
pub fn parse_evidence(text: &str, num_vars: usize) -> Result<Vec<(usize, usize)>> {
    let mut t = Tokens::new(text);
    let n = t.usize("evidence count")?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let v = t.usize(&format!("evidence variable {}", k))?;
        if v >= num_vars {
            return Err(Error::Parse {
                token: t.pos - 1,
                message: format!("evidence references unknown variable {}", v),
            });
        }
        let s = t.usize(&format!("evidence state {}", k))?;
        out.push((v, s));
    }
    Ok(out)
}

/// Serialize a query file.
pub fn to_query_string(max_vars: &[usize]) -> String {
    let mut parts = vec![max_vars.len().to_string()];
    parts.extend(max_vars.iter().map(|v| v.to_string()));
    parts.join(" ") + "\n"
}

/// Mark the listed variables as max nodes (everything else sum).
pub fn apply_query(fm: &FactorModel, query: &[usize]) -> Result<FactorModel> {
    let mut roles = vec![Role::Sum; fm.num_vars()];
    for &v in query {
        if v >= fm.num_vars() {
            return Err(Error::InvalidArgument(format!("query variable {} out of range", v)));
        }
        roles[v] = Role::Max;
    }
    FactorModel::new(fm.cards.clone(), roles, fm.factors.clone())
}

fn sample_node_pots<R: Rng>(rng: &mut R, n: usize, card: usize) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, 0.1).unwrap();
    (0..n)
        .map(|_| (0..card).map(|_| noise.sample(rng)).collect())
        .collect()
}

fn sample_edge_pots<R: Rng>(rng: &mut R, edges: usize, card: usize, sigma: f64) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
    (0..edges)
        .map(|_| (0..card * card).map(|_| noise.sample(rng)).collect())
        .collect()
}

/// Hidden Markov chain benchmark: `n/2` sum nodes in a chain, one pendant
/// max node per chain node, cardinality 3. Node potentials are
/// N(0, 0.1^2) per entry, edge potentials N(0, sigma^2).
pub fn gen_hmm(n: usize, sigma: f64, seed: u64) -> Result<PairwiseModel> {
    if n % 2 != 0 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "chain size must be even and positive, got {}",
            n
        )));
    }
    let card = 3;
    let h = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..h - 1 {
        edges.push((i, i + 1));
    }
    for i in 0..h {
        edges.push((i, h + i));
    }
    let mut roles = vec![Role::Sum; h];
    roles.extend(vec![Role::Max; h]);
    let node_pots = sample_node_pots(&mut rng, n, card);
    let edge_pots = sample_edge_pots(&mut rng, edges.len(), card, sigma);
    PairwiseModel::new(vec![card; n], roles, node_pots, edges, edge_pots)
}

/// Latent tree benchmark: minimum spanning tree of a random symmetric
/// Uniform([0,1]) matrix; leaves are max nodes, interior nodes sum nodes.
pub fn gen_latent_tree(n: usize, sigma: f64, seed: u64) -> Result<PairwiseModel> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "latent tree needs at least 3 nodes, got {}",
            n
        )));
    }
    let card = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // symmetric weight matrix, upper triangle drawn row by row
    let mut weights = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w: f64 = rng.random();
            weights[i][j] = w;
            weights[j][i] = w;
        }
    }
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            cand.push((weights[i][j], i, j));
        }
    }
    cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut uf = crate::model::UnionFind::new(n);
    let mut edges = Vec::new();
    for (_, i, j) in cand {
        if uf.union(i, j) {
            edges.push((i, j));
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    let mut degree = vec![0usize; n];
    for &(i, j) in &edges {
        degree[i] += 1;
        degree[j] += 1;
    }
    let roles: Vec<Role> = degree
        .iter()
        .map(|&d| if d <= 1 { Role::Max } else { Role::Sum })
        .collect();
    let node_pots = sample_node_pots(&mut rng, n, card);
    let edge_pots = sample_edge_pots(&mut rng, edges.len(), card, sigma);
    PairwiseModel::new(vec![card; n], roles, node_pots, edges, edge_pots)
}

/// Which chessboard color carries the sum nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPattern {
    /// Node `(r, c)` is a sum node iff `r + c` is even.
    SumLoopy,
    /// Parity flipped.
    MaxLoopy,
}

/// Square-lattice benchmark with chessboard roles.
pub fn gen_grid(
    side: usize,
    pattern: GridPattern,
    sigma: f64,
    seed: u64,
    card: usize,
) -> Result<PairwiseModel> {
    if side < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid side must be at least 2, got {}",
            side
        )));
    }
    if card < 2 {
        return Err(Error::InvalidArgument("grid cardinality must be at least 2".into()));
    }
    let n = side * side;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let at = |r: usize, c: usize| r * side + c;
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                edges.push((at(r, c), at(r, c + 1)));
            }
            if r + 1 < side {
                edges.push((at(r, c), at(r + 1, c)));
            }
        }
    }
    let roles: Vec<Role> = (0..n)
        .map(|v| {
            let (r, c) = (v / side, v % side);
            let even = (r + c) % 2 == 0;
            match pattern {
                GridPattern::SumLoopy => {
                    if even {
                        Role::Sum
                    } else {
                        Role::Max
                    }
                }
                GridPattern::MaxLoopy => {
                    if even {
                        Role::Max
                    } else {
                        Role::Sum
                    }
                }
            }
        })
        .collect();
    let node_pots = sample_node_pots(&mut rng, n, card);
    let edge_pots = sample_edge_pots(&mut rng, edges.len(), card, sigma);
    PairwiseModel::new(vec![card; n], roles, node_pots, edges, edge_pots)
}
