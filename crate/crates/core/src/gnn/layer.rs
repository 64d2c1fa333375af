use super::{GnnError, LayerLayout, ModelConfig};
use crate::game::N_PLAYERS;
use crate::graph::HeteroGraph;

/// `C = A·B + beta·C` for strided row/column layouts.
/// `a` is `m×k` with strides `(rsa, csa)`, `b` is `k×n`, `c` is `m×n` row-major.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, cs: usize, rows: usize, cols: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * r + (cols - 1) * cs + 1
        }
    };
    assert!(a.len() >= last(rsa, csa, m, k), "gemm: A too short");
    assert!(b.len() >= last(rsb, csb, k, n), "gemm: B too short");
    assert!(c.len() >= m * n, "gemm: C too short");
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Incoming edges of one destination node under one relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    /// Global node index (`graph·4 + seat`).
    pub dst: usize,
    /// Range into the relation's `srcs`.
    pub start: usize,
    pub end: usize,
}

/// Edges of one relation across a batch, grouped by destination.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationEdges {
    pub groups: Vec<Group>,
    pub srcs: Vec<usize>,
}

/// Graphs stacked into one node matrix, ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledBatch {
    pub n_graphs: usize,
    /// Node features, `4·n_graphs × in_dim`.
    pub x: Vec<f64>,
    pub labels: Vec<usize>,
    /// One entry per model relation, in config order.
    pub relations: Vec<RelationEdges>,
}

impl CompiledBatch {
    pub fn n_nodes(&self) -> usize {
        self.n_graphs * N_PLAYERS
    }

    /// Checks the graphs against the model's relation keys and stacks them.
    pub fn new(cfg: &ModelConfig, graphs: &[&HeteroGraph]) -> Result<Self, GnnError> {
        let r = cfg.n_relations();
        let mut per_rel: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); graphs.len() * N_PLAYERS]; r];
        let mut x = Vec::with_capacity(graphs.len() * N_PLAYERS * cfg.in_dim);
        let mut labels = Vec::with_capacity(graphs.len());
        for (b, g) in graphs.iter().enumerate() {
            if let Some(extra) = g.edges.keys().find(|k| !cfg.relation_keys.contains(k)) {
                log::debug!("graph {} carries relation {extra}", g.game_index);
                return Err(GnnError::SchemaMismatch {
                    expected: cfg.relation_keys.iter().map(|k| k.to_string()).collect(),
                    found: g.edges.keys().map(|k| k.to_string()).collect(),
                });
            }
            if cfg.in_dim != N_PLAYERS {
                return Err(GnnError::ShapeMismatch(format!(
                    "graphs carry {N_PLAYERS}-wide features, model expects {}",
                    cfg.in_dim
                )));
            }
            for row in &g.x {
                x.extend(row.iter().map(|v| *v as f64));
            }
            labels.push(g.spy_seat().index());
            for (e, key) in cfg.relation_keys.iter().enumerate() {
                for (s, d) in g.edges.get(key).map(Vec::as_slice).unwrap_or(&[]) {
                    per_rel[e][b * N_PLAYERS + d.index()].push(b * N_PLAYERS + s.index());
                }
            }
        }
        let relations = per_rel
            .into_iter()
            .map(|by_dst| {
                let mut rel = RelationEdges::default();
                for (dst, srcs) in by_dst.into_iter().enumerate() {
                    if !srcs.is_empty() {
                        let start = rel.srcs.len();
                        rel.srcs.extend(srcs);
                        rel.groups.push(Group {
                            dst,
                            start,
                            end: rel.srcs.len(),
                        });
                    }
                }
                rel
            })
            .collect();
        Ok(CompiledBatch {
            n_graphs: graphs.len(),
            x,
            labels,
            relations,
        })
    }
}

const LEAK: f64 = 0.2;

#[inline]
fn lrelu(u: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        LEAK * u
    }
}

#[inline]
fn lrelu_grad(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else {
        LEAK
    }
}

#[inline]
fn elu(m: f64) -> f64 {
    if m > 0.0 {
        m
    } else {
        m.exp_m1()
    }
}

#[inline]
fn elu_grad(m: f64) -> f64 {
    if m > 0.0 {
        1.0
    } else {
        m.exp()
    }
}

/// Intermediate values of one layer, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// Projected features for every relation and head, `N × R·H·O`.
    pub z: Vec<f64>,
    /// Attention-weighted sums before ELU, `N × R·H·O`; zero where a node
    /// has no in-neighbors under a relation.
    pub m: Vec<f64>,
    /// Attention coefficients per relation, laid out `[head][edge]`.
    pub alpha: Vec<Vec<f64>>,
    /// Raw attention scores, same layout as `alpha`.
    pub scores: Vec<Vec<f64>>,
}

impl LayerTrace {
    /// Attention rows: for each relation, destination, and head, the
    /// coefficients over that destination's in-edges.
    pub fn attention_rows<'a>(
        &'a self,
        batch: &'a CompiledBatch,
        heads: usize,
    ) -> impl Iterator<Item = &'a [f64]> + 'a {
        batch
            .relations
            .iter()
            .enumerate()
            .flat_map(move |(e, rel)| {
                let n_e = rel.srcs.len();
                let alpha = &self.alpha[e];
                rel.groups.iter().flat_map(move |g| {
                    (0..heads).map(move |h| &alpha[h * n_e + g.start..h * n_e + g.end])
                })
            })
    }
}

/// One relation-typed GATv2 layer. Returns the `N × H·O` output and the trace.
pub fn layer_forward(
    x: &[f64],
    batch: &CompiledBatch,
    params: &[f64],
    lay: &LayerLayout,
) -> (Vec<f64>, LayerTrace) {
    let n = batch.n_nodes();
    let (h_n, o_n, width, d_all) = (lay.heads, lay.out, lay.width(), lay.stacked());
    assert_eq!(x.len(), n * lay.in_dim, "layer input shape");
    let w = &params[lay.w..lay.a];
    let a = &params[lay.a..lay.a + d_all];

    // Z = X · W_allᵀ
    let mut z = vec![0.0; n * d_all];
    gemm(
        n,
        lay.in_dim,
        d_all,
        x,
        (lay.in_dim, 1),
        w,
        (1, lay.in_dim),
        0.0,
        &mut z,
    );

    let mut m = vec![0.0; n * d_all];
    let mut out = vec![0.0; n * width];
    let mut alpha = Vec::with_capacity(batch.relations.len());
    let mut scores = Vec::with_capacity(batch.relations.len());
    for (e, rel) in batch.relations.iter().enumerate() {
        let n_e = rel.srcs.len();
        let mut al = vec![0.0; h_n * n_e];
        let mut sc = vec![0.0; h_n * n_e];
        for g in &rel.groups {
            let i = g.dst;
            for h in 0..h_n {
                let base = e * width + h * o_n;
                let zi = &z[i * d_all + base..i * d_all + base + o_n];
                let av = &a[base..base + o_n];
                let row = &mut sc[h * n_e + g.start..h * n_e + g.end];
                for (k, &j) in rel.srcs[g.start..g.end].iter().enumerate() {
                    let zj = &z[j * d_all + base..j * d_all + base + o_n];
                    row[k] = (0..o_n).map(|o| av[o] * lrelu(zi[o] + zj[o])).sum();
                }
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let arow = &mut al[h * n_e + g.start..h * n_e + g.end];
                let mut total = 0.0;
                for (t, s) in arow.iter_mut().zip(row.iter()) {
                    *t = (s - mx).exp();
                    total += *t;
                }
                for t in arow.iter_mut() {
                    *t /= total;
                }
                let mi = i * d_all + base;
                for (k, &j) in rel.srcs[g.start..g.end].iter().enumerate() {
                    let coef = arow[k];
                    let zj = j * d_all + base;
                    for o in 0..o_n {
                        m[mi + o] += coef * z[zj + o];
                    }
                }
                let oi = i * width + h * o_n;
                for o in 0..o_n {
                    out[oi + o] += elu(m[mi + o]);
                }
            }
        }
        alpha.push(al);
        scores.push(sc);
    }
    (
        out,
        LayerTrace {
            z,
            m,
            alpha,
            scores,
        },
    )
}

/// Backward pass of [`layer_forward`]. Accumulates parameter gradients into
/// `grad` and returns `dL/dX` when `want_dx`.
pub fn layer_backward(
    x: &[f64],
    batch: &CompiledBatch,
    params: &[f64],
    lay: &LayerLayout,
    trace: &LayerTrace,
    d_out: &[f64],
    grad: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    let n = batch.n_nodes();
    let (h_n, o_n, width, d_all) = (lay.heads, lay.out, lay.width(), lay.stacked());
    let a = &params[lay.a..lay.a + d_all];
    let z = &trace.z;
    let mut dz = vec![0.0; n * d_all];
    let mut dm = vec![0.0; o_n];
    let mut du = vec![0.0; o_n];
    let mut dalpha: Vec<f64> = Vec::new();
    {
        let (_, rest) = grad.split_at_mut(lay.a);
        let da = &mut rest[..d_all];
        for (e, rel) in batch.relations.iter().enumerate() {
            let n_e = rel.srcs.len();
            for g in &rel.groups {
                let i = g.dst;
                let srcs = &rel.srcs[g.start..g.end];
                for h in 0..h_n {
                    let base = e * width + h * o_n;
                    let mi = i * d_all + base;
                    let oi = i * width + h * o_n;
                    for o in 0..o_n {
                        dm[o] = d_out[oi + o] * elu_grad(trace.m[mi + o]);
                    }
                    let arow = &trace.alpha[e][h * n_e + g.start..h * n_e + g.end];
                    dalpha.clear();
                    for (k, &j) in srcs.iter().enumerate() {
                        let zj = j * d_all + base;
                        let mut acc = 0.0;
                        for o in 0..o_n {
                            acc += dm[o] * z[zj + o];
                            dz[zj + o] += arow[k] * dm[o];
                        }
                        dalpha.push(acc);
                    }
                    let mean: f64 = arow.iter().zip(&dalpha).map(|(p, d)| p * d).sum();
                    for (k, &j) in srcs.iter().enumerate() {
                        let ds = arow[k] * (dalpha[k] - mean);
                        if ds == 0.0 {
                            continue;
                        }
                        let zj = j * d_all + base;
                        for o in 0..o_n {
                            let u = z[mi + o] + z[zj + o];
                            da[base + o] += ds * lrelu(u);
                            du[o] = ds * a[base + o] * lrelu_grad(u);
                        }
                        for o in 0..o_n {
                            dz[mi + o] += du[o];
                            dz[zj + o] += du[o];
                        }
                    }
                }
            }
        }
    }
    // dW_all += dZᵀ · X
    gemm(
        d_all,
        n,
        lay.in_dim,
        &dz,
        (1, d_all),
        x,
        (lay.in_dim, 1),
        1.0,
        &mut grad[lay.w..lay.a],
    );
    if !want_dx {
        return None;
    }
    // dX = dZ · W_all
    let mut dx = vec![0.0; n * lay.in_dim];
    gemm(
        n,
        d_all,
        lay.in_dim,
        &dz,
        (d_all, 1),
        &params[lay.w..lay.a],
        (lay.in_dim, 1),
        0.0,
        &mut dx,
    );
    Some(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive() {
        let (m, k, n) = (3, 5, 4);
        let a: Vec<f64> = (0..m * k).map(|v| v as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * n).map(|v| (v as f64).sin()).collect();
        let mut c = vec![1.0; m * n];
        gemm(m, k, n, &a, (k, 1), &b, (n, 1), 1.0, &mut c);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = 1.0 + (0..k).map(|t| a[i * k + t] * b[t * n + j]).sum::<f64>();
                assert!((c[i * n + j] - want).abs() < 1e-12);
            }
        }
        // transposed A via strides
        let mut c2 = vec![0.0; k * n];
        let at: Vec<f64> = a.clone();
        gemm(k, m, n, &at, (1, k), &c, (n, 1), 0.0, &mut c2);
        for i in 0..k {
            for j in 0..n {
                let want: f64 = (0..m).map(|t| a[t * k + i] * c[t * n + j]).sum();
                assert!((c2[i * n + j] - want).abs() < 1e-9);
            }
        }
    }
}
