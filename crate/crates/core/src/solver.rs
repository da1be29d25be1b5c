//! DC operating point by Newton iteration on the modified nodal equations.
//!
//! Unknowns are the voltages of nodes that are neither ground nor fixed by a
//! source, plus one branch current per zero-ohm resistor. The unknowns are
//! ordered by reverse Cuthill-McKee and the Jacobian is factorised as a band
//! matrix with partial pivoting. The ordering and band layout depend only on
//! the netlist structure, so a [`Plan`] can be reused across netlists that
//! differ only in element values (for example, different weights or inputs).

use crate::devices::{BitCell, CellElement, Fidelity};
use crate::error::{Error, Result};
use crate::topology::{build, Axis, CrossbarConfig, Element, Netlist, NodeId, Topology, GROUND};
use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverOptions {
    /// Largest acceptable KCL mismatch at any node (A).
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Smallest step fraction tried when a Newton step increases the residual.
    pub min_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            max_iterations: 100,
            min_damping: 1.0 / 64.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || self.max_iterations == 0 || !(self.min_damping > 0.0 && self.min_damping <= 1.0) {
            return Err(Error::Config("solver options need tol > 0, max_iterations >= 1, 0 < min_damping <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveResult {
    /// Voltage of every node, indexed by node id (ground included).
    pub voltages: Vec<f64>,
    /// Current through every element from its first to its second terminal.
    pub element_currents: Vec<f64>,
    /// Current into each column's sink.
    pub column_currents: Vec<f64>,
    pub iterations: usize,
    /// Largest KCL mismatch at the returned point (A).
    pub max_residual: f64,
}

impl SolveResult {
    /// Total current leaving the fixed-voltage nodes.
    pub fn source_current(&self, net: &Netlist) -> f64 {
        let mut total = 0.0;
        for &(node, _) in &net.sources {
            for (k, e) in net.elements.iter().enumerate() {
                let (a, b) = e.terminals();
                if a == node {
                    total += self.element_currents[k];
                }
                if b == node {
                    total -= self.element_currents[k];
                }
            }
        }
        total
    }
}

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
enum Var {
    Fixed(f64),
    Unknown(usize),
}

/// Band positions of the four stamp entries of a two-terminal element.
#[derive(Debug, Clone, Copy)]
struct Stamp {
    aa: usize,
    ab: usize,
    ba: usize,
    bb: usize,
}

/// Structure shared by netlists with identical topology.
#[derive(Debug, Clone)]
pub struct Plan {
    node_count: usize,
    terminals: Vec<(NodeId, NodeId, bool)>,
    source_nodes: Vec<NodeId>,
    /// Per node: unknown index after ordering, or `NONE` for ground/sources.
    node_var: Vec<usize>,
    /// Per element: branch unknown index for zero-ohm resistors.
    branch_var: Vec<usize>,
    stamps: Vec<Stamp>,
    /// Branch rows: positions of `+1` (column a) and `-1` (column b), and the
    /// KCL positions of the branch current column.
    branch_rows: Vec<(usize, usize, usize, usize)>,
    unknowns: usize,
    band: Band,
}

fn is_zero_resistor(e: &Element) -> bool {
    matches!(e, Element::Resistor { r, .. } if *r == 0.0)
}

impl Plan {
    pub fn new(net: &Netlist) -> Result<Self> {
        net.check()?;
        let n_nodes = net.node_count;
        let mut fixed = vec![false; n_nodes];
        fixed[GROUND] = true;
        for &(s, _) in &net.sources {
            fixed[s] = true;
        }
        // Provisional numbering: free nodes then branch currents.
        let mut prov_node = vec![NONE; n_nodes];
        let mut count = 0;
        for (i, f) in fixed.iter().enumerate() {
            if !f {
                prov_node[i] = count;
                count += 1;
            }
        }
        let mut prov_branch = vec![NONE; net.elements.len()];
        for (k, e) in net.elements.iter().enumerate() {
            if is_zero_resistor(e) {
                let (a, b) = e.terminals();
                if fixed[a] && fixed[b] {
                    return Err(Error::Structure(format!("zero-ohm element {k} joins two fixed nodes")));
                }
                prov_branch[k] = count;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Structure("netlist has no unknowns".into()));
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); count];
        let mut link = |p: usize, q: usize| {
            if p != NONE && q != NONE && p != q {
                adj[p].push(q);
                adj[q].push(p);
            }
        };
        for (k, e) in net.elements.iter().enumerate() {
            let (a, b) = e.terminals();
            link(prov_node[a], prov_node[b]);
            if prov_branch[k] != NONE {
                link(prov_branch[k], prov_node[a]);
                link(prov_branch[k], prov_node[b]);
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; count];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let remap = |p: usize| if p == NONE { NONE } else { inv[p] };
        let node_var: Vec<usize> = prov_node.iter().map(|&p| remap(p)).collect();
        let branch_var: Vec<usize> = prov_branch.iter().map(|&p| remap(p)).collect();

        let (mut kl, mut ku) = (0usize, 0usize);
        let mut widen = |r: usize, c: usize| {
            if r != NONE && c != NONE {
                if r > c {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        };
        for (k, e) in net.elements.iter().enumerate() {
            let (a, b) = e.terminals();
            let (p, q) = (node_var[a], node_var[b]);
            if branch_var[k] != NONE {
                let br = branch_var[k];
                for v in [p, q] {
                    widen(v, br);
                    widen(br, v);
                }
            } else {
                widen(p, q);
                widen(q, p);
            }
        }
        let band = Band::new(count, kl, ku);
        let pos = |r: usize, c: usize| if r == NONE || c == NONE { NONE } else { band.index(r, c) };
        let mut stamps = Vec::with_capacity(net.elements.len());
        let mut branch_rows = Vec::new();
        for (k, e) in net.elements.iter().enumerate() {
            let (a, b) = e.terminals();
            let (p, q) = (node_var[a], node_var[b]);
            if branch_var[k] != NONE {
                let br = branch_var[k];
                branch_rows.push((pos(br, p), pos(br, q), pos(p, br), pos(q, br)));
                stamps.push(Stamp {
                    aa: NONE,
                    ab: NONE,
                    ba: NONE,
                    bb: NONE,
                });
            } else {
                stamps.push(Stamp {
                    aa: pos(p, p),
                    ab: pos(p, q),
                    ba: pos(q, p),
                    bb: pos(q, q),
                });
            }
        }
        Ok(Self {
            node_count: n_nodes,
            terminals: net
                .elements
                .iter()
                .map(|e| {
                    let (a, b) = e.terminals();
                    (a, b, is_zero_resistor(e))
                })
                .collect(),
            source_nodes: net.sources.iter().map(|s| s.0).collect(),
            node_var,
            branch_var,
            stamps,
            branch_rows,
            unknowns: count,
            band,
        })
    }

    /// Number of unknowns and the lower/upper bandwidth after ordering.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.unknowns, self.band.kl, self.band.ku)
    }

    fn compatible(&self, net: &Netlist) -> bool {
        net.node_count == self.node_count
            && net.elements.len() == self.terminals.len()
            && net.sources.len() == self.source_nodes.len()
            && net.sources.iter().zip(&self.source_nodes).all(|(s, &n)| s.0 == n)
            && net.elements.iter().zip(&self.terminals).all(|(e, &(a, b, z))| {
                let (x, y) = e.terminals();
                x == a && y == b && is_zero_resistor(e) == z
            })
    }

    fn var(&self, net: &Netlist, node: NodeId, source_v: &[f64]) -> Var {
        let _ = net;
        match self.node_var[node] {
            NONE => Var::Fixed(source_v[node]),
            u => Var::Unknown(u),
        }
    }

    /// Solves `net`, which must have the structure this plan was built for.
    pub fn solve(&self, net: &Netlist, opts: &SolverOptions) -> Result<SolveResult> {
        opts.validate()?;
        if !self.compatible(net) {
            return Err(Error::Structure("netlist structure differs from the solver plan".into()));
        }
        let mut fixed_v = vec![0.0; self.node_count];
        for &(n, v) in &net.sources {
            fixed_v[n] = v;
        }
        let n = self.unknowns;
        let mut x = vec![0.0; n];
        let mut f = vec![0.0; n];
        let mut work = self.band.zeroed();
        let mut residual = self.residual(net, &fixed_v, &x, &mut f, None);
        let mut iterations = 0;
        let mut dx = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut f_trial = vec![0.0; n];
        // An absolute current tolerance is loose for high-resistance devices,
        // so non-linear nets take one more full Newton step after converging.
        let mut polish = net.elements.iter().any(|e| {
            matches!(
                e,
                Element::Device {
                    el: CellElement::Sinh { .. } | CellElement::Fet { .. },
                    ..
                }
            )
        });
        loop {
            if residual.0 <= opts.residual_tol && residual.1 <= opts.residual_tol {
                if !polish {
                    break;
                }
                polish = false;
            }
            if iterations >= opts.max_iterations {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: residual.0,
                });
            }
            work.fill(0.0);
            self.residual(net, &fixed_v, &x, &mut f, Some(&mut work));
            for (d, r) in dx.iter_mut().zip(&f) {
                *d = -r;
            }
            self.band.solve_in_place(&mut work, &mut dx)?;
            iterations += 1;
            let mut alpha = 1.0;
            loop {
                for i in 0..n {
                    trial[i] = x[i] + alpha * dx[i];
                }
                let r = self.residual(net, &fixed_v, &trial, &mut f_trial, None);
                if r.0.is_finite() && (r.0 <= residual.0 || alpha <= opts.min_damping) {
                    core::mem::swap(&mut x, &mut trial);
                    residual = r;
                    break;
                }
                alpha *= 0.5;
            }
            if !residual.0.is_finite() {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: residual.0,
                });
            }
        }
        self.finish(net, &fixed_v, &x, iterations, residual.0)
    }

    /// KCL residual (A) and branch-equation residual (V); optionally stamps the Jacobian.
    fn residual(&self, net: &Netlist, fixed_v: &[f64], x: &[f64], f: &mut [f64], mut jac: Option<&mut [f64]>) -> (f64, f64) {
        f.fill(0.0);
        let volt = |node: NodeId| match self.var(net, node, fixed_v) {
            Var::Fixed(v) => v,
            Var::Unknown(u) => x[u],
        };
        let mut branch_res: f64 = 0.0;
        let mut br_row = 0;
        for (k, e) in net.elements.iter().enumerate() {
            let (a, b) = e.terminals();
            let (p, q) = (self.node_var[a], self.node_var[b]);
            let (va, vb) = (volt(a), volt(b));
            if self.branch_var[k] != NONE {
                let br = self.branch_var[k];
                let i = x[br];
                if p != NONE {
                    f[p] += i;
                }
                if q != NONE {
                    f[q] -= i;
                }
                f[br] = va - vb;
                branch_res = branch_res.max((va - vb).abs());
                if let Some(j) = jac.as_deref_mut() {
                    let (rp, rq, cp, cq) = self.branch_rows[br_row];
                    if rp != NONE {
                        j[rp] += 1.0;
                    }
                    if rq != NONE {
                        j[rq] -= 1.0;
                    }
                    if cp != NONE {
                        j[cp] += 1.0;
                    }
                    if cq != NONE {
                        j[cq] -= 1.0;
                    }
                }
                br_row += 1;
                continue;
            }
            let (i, dva, dvb) = match *e {
                Element::Resistor { r, .. } => {
                    let g = 1.0 / r;
                    ((va - vb) * g, g, -g)
                }
                Element::Device { el, .. } => device_eval(&el, va, vb),
            };
            if p != NONE {
                f[p] += i;
            }
            if q != NONE {
                f[q] -= i;
            }
            if let Some(j) = jac.as_deref_mut() {
                let s = &self.stamps[k];
                if s.aa != NONE {
                    j[s.aa] += dva;
                }
                if s.ab != NONE {
                    j[s.ab] += dvb;
                }
                if s.ba != NONE {
                    j[s.ba] -= dva;
                }
                if s.bb != NONE {
                    j[s.bb] -= dvb;
                }
            }
        }
        let mut kcl: f64 = 0.0;
        for (node, &u) in self.node_var.iter().enumerate() {
            if u != NONE && node != GROUND {
                kcl = kcl.max(f[u].abs());
            }
        }
        (kcl, branch_res)
    }

    fn finish(&self, net: &Netlist, fixed_v: &[f64], x: &[f64], iterations: usize, max_residual: f64) -> Result<SolveResult> {
        let voltages: Vec<f64> = (0..self.node_count)
            .map(|node| match self.node_var[node] {
                NONE => fixed_v[node],
                u => x[u],
            })
            .collect();
        if voltages.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence {
                iterations,
                residual: f64::NAN,
            });
        }
        let element_currents: Vec<f64> = net
            .elements
            .iter()
            .enumerate()
            .map(|(k, e)| {
                if self.branch_var[k] != NONE {
                    return x[self.branch_var[k]];
                }
                let (a, b) = e.terminals();
                match *e {
                    Element::Resistor { r, .. } => (voltages[a] - voltages[b]) / r,
                    Element::Device { el, .. } => device_eval(&el, voltages[a], voltages[b]).0,
                }
            })
            .collect();
        let column_currents = net.sense.iter().map(|&k| element_currents[k]).collect();
        Ok(SolveResult {
            voltages,
            element_currents,
            column_currents,
            iterations,
            max_residual,
        })
    }
}

/// Current from `a` to `b` and its partial derivatives in `v_a`, `v_b`.
#[inline]
fn device_eval(el: &CellElement, va: f64, vb: f64) -> (f64, f64, f64) {
    match *el {
        CellElement::Linear { r } => {
            let g = 1.0 / r;
            ((va - vb) * g, g, -g)
        }
        CellElement::Sinh { device, .. } => {
            let (i, g) = device.eval(va - vb);
            (i, g, -g)
        }
        CellElement::Fet { channel, vg } => channel.eval(vg, va, vb),
    }
}

/// One-shot DC solve.
pub fn solve_dc(net: &Netlist, opts: &SolverOptions) -> Result<SolveResult> {
    Plan::new(net)?.solve(net, opts)
}

/// Reverse Cuthill-McKee over an undirected adjacency list.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = peripheral(adj, start);
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Pseudo-peripheral node of `start`'s component (George-Liu).
fn peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let mut root = start;
    let mut depth = 0;
    loop {
        let (levels, last) = bfs_levels(adj, root);
        if levels <= depth {
            return root;
        }
        depth = levels;
        let cand = last.into_iter().min_by_key(|&v| (adj[v].len(), v)).unwrap_or(root);
        if cand == root {
            return root;
        }
        root = cand;
    }
}

fn bfs_levels(adj: &[Vec<usize>], root: usize) -> (usize, Vec<usize>) {
    let mut seen = alloc::collections::BTreeSet::new();
    seen.insert(root);
    let mut frontier = vec![root];
    let mut levels = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if seen.insert(w) {
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (levels, frontier);
        }
        levels += 1;
        frontier = next;
    }
}

/// Column-major band storage with room for pivoting fill (LAPACK `gb` layout).
#[derive(Debug, Clone)]
struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
}

impl Band {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, ld: 2 * kl + ku + 1 }
    }

    fn zeroed(&self) -> Vec<f64> {
        vec![0.0; self.ld * self.n]
    }

    #[inline]
    fn index(&self, r: usize, c: usize) -> usize {
        (self.kl + self.ku + r - c) + c * self.ld
    }

    /// LU with partial pivoting followed by the triangular solves.
    fn solve_in_place(&self, ab: &mut [f64], b: &mut [f64]) -> Result<()> {
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * self.ld + kv;
            let mut jp = 0;
            let mut best = ab[col].abs();
            for t in 1..=km {
                let v = ab[col + t].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { pivot: j });
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(self.index(j, c), self.index(j + jp, c));
                }
            }
            if km > 0 {
                let inv = 1.0 / ab[col];
                for t in 1..=km {
                    ab[col + t] *= inv;
                }
                for c in j + 1..=ju {
                    let u = ab[self.index(j, c)];
                    if u != 0.0 {
                        let base = self.index(j, c);
                        for t in 1..=km {
                            ab[base + t] -= ab[col + t] * u;
                        }
                    }
                }
            }
        }
        for j in 0..n {
            let p = ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let col = j * self.ld + kv;
            let bj = b[j];
            if bj != 0.0 {
                for t in 1..=km {
                    b[j + t] -= ab[col + t] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * self.ld + kv;
            b[j] /= ab[col];
            let bj = b[j];
            if bj != 0.0 {
                let top = j.saturating_sub(kv);
                for i in top..j {
                    b[i] -= ab[self.index(i, j)] * bj;
                }
            }
        }
        Ok(())
    }
}

/// Ideal MVM output for binary inputs and weights:
/// `I_j = Σ_i x_i · V · w_ij · G_ON`.
pub fn ideal_output(inputs: &[bool], weights: &[bool], v: f64, g_on: f64) -> Result<Vec<f64>> {
    let n = inputs.len();
    if n == 0 || weights.len() % n != 0 {
        return Err(Error::Dimension(format!("{} weights for {n} rows", weights.len())));
    }
    let m = weights.len() / n;
    let mut out = vec![0.0; m];
    for (i, &x) in inputs.iter().enumerate() {
        if x {
            for (j, o) in out.iter_mut().enumerate() {
                if weights[i * m + j] {
                    *o += v * g_on;
                }
            }
        }
    }
    Ok(out)
}

/// Column currents with every parasitic removed and every cell replaced by
/// its linear (Level0) conductance, scaled by the optional variation factors.
/// With binary cells whose input-0 and weight-0 states do not conduct this is
/// exactly [`ideal_output`].
pub fn reference_currents(
    cfg: &CrossbarConfig,
    cell: &BitCell,
    weights: &[bool],
    inputs: &[bool],
    factors: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let (n, m) = (cfg.rows, cfg.cols);
    if weights.len() != n * m || inputs.len() != n || factors.is_some_and(|f| f.len() != n * m) {
        return Err(Error::Dimension(format!("pattern does not match a {n}x{m} array")));
    }
    let mut out = vec![0.0; m];
    for i in 0..n {
        let (state_input, v) = match cfg.topology {
            Topology::GateInput => (inputs[i], cfg.v_bl),
            Topology::DrainInput => (true, if inputs[i] { cfg.v_bl } else { 0.0 }),
        };
        if v == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            let k = i * m + j;
            let g = cell.conductance(state_input, weights[k]) * factors.map_or(1.0, |f| f[k]);
            *o += v * g;
        }
    }
    Ok(out)
}

/// One linear gate-input column: a bit-line rail and a sense-line rail joined
/// by one conductance per row, fed through `top` and drained through `bottom`.
///
/// The nodal matrix is block tridiagonal with 2x2 blocks and symmetric
/// positive definite, so block elimination without pivoting is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ladder {
    top: f64,
    seg: f64,
    bottom: f64,
}

impl Ladder {
    pub fn for_config(cfg: &CrossbarConfig, cell: &BitCell) -> Option<Self> {
        if cfg.topology != Topology::GateInput || cell.fidelity != Fidelity::Level0 {
            return None;
        }
        let p = &cfg.parasitics;
        let seg = cfg.segment(Axis::Vertical);
        let l = Self {
            top: p.r_driver + p.via_res + seg,
            seg,
            bottom: seg + p.via_res + p.r_sink,
        };
        // A non-zero segment makes both end resistances non-zero as well.
        [l.top, l.bottom].iter().all(|r| r.is_finite()).then_some(l)
    }

    /// Sense current for drive `v` and row conductances `g` (first row nearest the driver).
    pub fn current(&self, v: f64, g: &[f64]) -> f64 {
        let n = g.len();
        if n == 0 {
            return 0.0;
        }
        if self.seg == 0.0 {
            // Both rails collapse to single nodes.
            let g_total: f64 = g.iter().sum();
            return if g_total > 0.0 { v / (self.top + self.bottom + 1.0 / g_total) } else { 0.0 };
        }
        let gs = 1.0 / self.seg;
        // Forward sweep with C_i = -gs·M_i^{-1} (symmetric, stored as 3 entries).
        // The last row's reduced right-hand side is already its solution.
        let (mut cp, mut dp) = ([0.0; 3], [0.0; 2]);
        for i in 0..n {
            let up_b = if i == 0 { 1.0 / self.top } else { gs };
            let up_s = if i == 0 { 0.0 } else { gs };
            let dn_b = if i + 1 < n { gs } else { 0.0 };
            let dn_s = if i + 1 < n { gs } else { 1.0 / self.bottom };
            // M = A_i + gs·C_{i-1} with A_i = [[gb, -g], [-g, gs_]].
            let (m00, m01, m11) = if i == 0 {
                (up_b + dn_b + g[0], -g[0], up_s + dn_s + g[0])
            } else {
                (
                    up_b + dn_b + g[i] + gs * cp[0],
                    -g[i] + gs * cp[1],
                    up_s + dn_s + g[i] + gs * cp[2],
                )
            };
            let det = m00 * m11 - m01 * m01;
            let inv = [m11 / det, -m01 / det, m00 / det];
            let f = if i == 0 { [v / self.top, 0.0] } else { [gs * dp[0], gs * dp[1]] };
            dp = [inv[0] * f[0] + inv[1] * f[1], inv[1] * f[0] + inv[2] * f[1]];
            cp = [-gs * inv[0], -gs * inv[1], -gs * inv[2]];
        }
        dp[1] / self.bottom
    }

    /// [`Ladder::current`] for `m` columns at once; `g` is row-major `n × m`.
    pub fn currents(&self, v: f64, g: &[f64], m: usize, out: &mut [f64]) {
        let n = if m == 0 { 0 } else { g.len() / m };
        if n == 0 || self.seg == 0.0 {
            for (j, o) in out.iter_mut().enumerate().take(m) {
                let col: Vec<f64> = (0..n).map(|i| g[i * m + j]).collect();
                *o = self.current(v, &col);
            }
            return;
        }
        let gs = 1.0 / self.seg;
        let (mut c0, mut c1, mut c2) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let (mut d0, mut d1) = (vec![0.0; m], vec![0.0; m]);
        for i in 0..n {
            let row = &g[i * m..(i + 1) * m];
            let up_b = if i == 0 { 1.0 / self.top } else { gs };
            let up_s = if i == 0 { 0.0 } else { gs };
            let dn_b = if i + 1 < n { gs } else { 0.0 };
            let dn_s = if i + 1 < n { gs } else { 1.0 / self.bottom };
            let (base_b, base_s) = (up_b + dn_b, up_s + dn_s);
            let (fb0, carry) = if i == 0 { (v / self.top, 0.0) } else { (0.0, gs) };
            for j in 0..m {
                let gij = row[j];
                let m00 = base_b + gij + gs * c0[j];
                let m01 = -gij + gs * c1[j];
                let m11 = base_s + gij + gs * c2[j];
                let r = 1.0 / (m00 * m11 - m01 * m01);
                let (i00, i01, i11) = (m11 * r, -m01 * r, m00 * r);
                let (f0, f1) = (fb0 + carry * d0[j], carry * d1[j]);
                d0[j] = i00 * f0 + i01 * f1;
                d1[j] = i01 * f0 + i11 * f1;
                c0[j] = -gs * i00;
                c1[j] = -gs * i01;
                c2[j] = -gs * i11;
            }
        }
        let gb = 1.0 / self.bottom;
        for (o, d) in out.iter_mut().zip(&d1) {
            *o = d * gb;
        }
    }
}

/// A configured array with its calibrated cell and a reusable solver plan.
#[derive(Debug, Clone)]
pub struct ArraySolver {
    pub cfg: CrossbarConfig,
    pub cell: BitCell,
    pub opts: SolverOptions,
    plan: Plan,
    ladder: Option<Ladder>,
}

impl ArraySolver {
    pub fn new(cfg: &CrossbarConfig, opts: &SolverOptions) -> Result<Self> {
        let cell = cfg.bit_cell()?;
        Self::with_cell(cfg, cell, opts)
    }

    pub fn with_cell(cfg: &CrossbarConfig, cell: BitCell, opts: &SolverOptions) -> Result<Self> {
        cfg.validate()?;
        opts.validate()?;
        let n = cfg.rows * cfg.cols;
        let template = build(cfg, &cell, &vec![false; n], &vec![false; cfg.rows], None)?;
        Ok(Self {
            cfg: *cfg,
            cell,
            opts: *opts,
            plan: Plan::new(&template)?,
            ladder: Ladder::for_config(cfg, &cell),
        })
    }

    pub fn solve(&self, weights: &[bool], inputs: &[bool], factors: Option<&[f64]>) -> Result<SolveResult> {
        let net = build(&self.cfg, &self.cell, weights, inputs, factors)?;
        self.plan.solve(&net, &self.opts)
    }

    /// Sense currents of every column. Linear gate-input arrays with non-zero
    /// wiring use the column ladder; everything else the general solve.
    pub fn column_currents(&self, weights: &[bool], inputs: &[bool], factors: Option<&[f64]>) -> Result<Vec<f64>> {
        match self.ladder {
            Some(ladder) => {
                let (n, m) = (self.cfg.rows, self.cfg.cols);
                if weights.len() != n * m || inputs.len() != n || factors.is_some_and(|f| f.len() != n * m) {
                    return Err(Error::Dimension(format!("pattern does not match a {n}x{m} array")));
                }
                let table = [
                    [self.cell.conductance(false, false), self.cell.conductance(false, true)],
                    [self.cell.conductance(true, false), self.cell.conductance(true, true)],
                ];
                let mut g: Vec<f64> = weights
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| table[inputs[k / m] as usize][w as usize])
                    .collect();
                if let Some(f) = factors {
                    g.iter_mut().zip(f).for_each(|(g, f)| *g *= f);
                }
                let mut out = vec![0.0; m];
                ladder.currents(self.cfg.v_bl, &g, m, &mut out);
                Ok(out)
            }
            None => Ok(self.solve(weights, inputs, factors)?.column_currents),
        }
    }

    /// Sense current of a single gate-input column with explicit per-row
    /// states; `None` when the array is not a linear ladder.
    pub fn ladder_current(&self, conductances: &[f64]) -> Option<f64> {
        self.ladder.map(|l| l.current(self.cfg.v_bl, conductances))
    }

    pub fn reference(&self, weights: &[bool], inputs: &[bool], factors: Option<&[f64]>) -> Result<Vec<f64>> {
        reference_currents(&self.cfg, &self.cell, weights, inputs, factors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{ReramParams, Technology};
    use crate::topology::{build, build_gate_input, CrossbarConfig, Parasitics, Topology};

    #[test]
    fn band_lu_matches_dense_with_pivoting() {
        // Zero diagonal in row 0 forces a row exchange.
        let a = [[0.0, 2.0, 0.0], [1.0, 1.0, 3.0], [0.0, 4.0, 5.0]];
        let band = Band::new(3, 2, 2);
        let mut ab = band.zeroed();
        for r in 0..3 {
            for c in 0..3 {
                if a[r][c] != 0.0 {
                    ab[band.index(r, c)] = a[r][c];
                }
            }
        }
        let mut b = [2.0, 5.0, 9.0];
        band.solve_in_place(&mut ab, &mut b).unwrap();
        for (x, e) in b.iter().zip([1.0, 1.0, 1.0]) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn rcm_keeps_ladder_band_narrow() {
        let cfg = CrossbarConfig::new(Technology::Fefet, 64, 4);
        let cell = cfg.bit_cell().unwrap();
        let net = build_gate_input(&cfg, &cell, &[true; 256], &[true; 64], None).unwrap();
        let (_, kl, ku) = Plan::new(&net).unwrap().shape();
        assert!(kl <= 4 && ku <= 4, "{kl} {ku}");
    }

    #[test]
    fn one_by_one_chain() {
        let cfg = CrossbarConfig::new(Technology::Fefet, 1, 1);
        let cell = cfg.bit_cell().unwrap();
        let net = build(&cfg, &cell, &[true], &[true], None).unwrap();
        let r = solve_dc(&net, &SolverOptions::default()).unwrap();
        let expected = 0.25 / (500.0 + 56.0 + 9.828 + cell.table.on + 9.828 + 56.0 + 100.0);
        assert!((r.column_currents[0] - expected).abs() / expected < 1e-12);
        assert!((r.column_currents[0] - 4.1165e-6).abs() < 5e-10);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn zero_excitation() {
        let mut cfg = CrossbarConfig::new(Technology::Sram, 3, 3);
        let cell = cfg.bit_cell().unwrap();
        cfg.v_bl = 0.0;
        let net = build(&cfg, &cell, &[true; 9], &[true; 3], None).unwrap();
        let r = solve_dc(&net, &SolverOptions::default()).unwrap();
        assert!(r.voltages.iter().all(|&v| v == 0.0));
        assert!(r.column_currents.iter().all(|&i| i == 0.0));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn zero_parasitics_reproduce_ideal() {
        for topo in [Topology::GateInput, Topology::DrainInput] {
            let mut cfg = CrossbarConfig::new(Technology::Sram, 4, 3);
            cfg.topology = topo;
            cfg.parasitics = Parasitics::zero();
            let cell = cfg.bit_cell().unwrap();
            let w = [true, false, true, true, true, false, false, true, true, true, true, true];
            let x = [true, true, false, true];
            let net = build(&cfg, &cell, &w, &x, None).unwrap();
            let r = solve_dc(&net, &SolverOptions::default()).unwrap();
            for j in 0..3 {
                let mut ideal = 0.0;
                for i in 0..4 {
                    let input = topo == Topology::DrainInput || x[i];
                    let v = if topo == Topology::DrainInput && !x[i] { 0.0 } else { 0.25 };
                    ideal += v * cell.conductance(input, w[i * 3 + j]);
                }
                assert!((r.column_currents[j] - ideal).abs() <= 1e-12 * ideal, "{topo:?}");
            }
        }
    }

    #[test]
    fn reram_two_node_matches_bisection() {
        // source --R_D-- node --sinh-- ground
        let p = ReramParams::default().with_gap(0.4).unwrap();
        let rd = 500.0;
        let net = Netlist::parse(&format!(
            "nodes 3\nV 1 0.25\nR 1 2 {rd:?}\nC 2 0 sinh:{:?}:{:?}:{:?}:{:?}\n",
            p.i0, p.g0_nm, p.v0, p.gap_nm
        ))
        .unwrap();
        let r = solve_dc(&net, &SolverOptions::default()).unwrap();
        let v = crate::numeric::bisect(|v| (0.25 - v) / rd - p.eval(v).0, 0.0, 0.25, 300).unwrap();
        let i_ref = p.eval(v).0;
        assert!((r.element_currents[1] - i_ref).abs() / i_ref <= 1e-10);
        assert!(r.iterations > 1);
    }

    #[test]
    fn conservation() {
        // Node voltages near 0.25 V carry ~3e-17 V of rounding; across a 10 ohm
        // segment that is ~3e-18 A, so the check uses arrays with tens of µA.
        for topo in [Topology::GateInput, Topology::DrainInput] {
            let mut cfg = CrossbarConfig::new(Technology::Fefet, 4, 4);
            cfg.topology = topo;
            let cell = cfg.bit_cell().unwrap();
            let net = build(&cfg, &cell, &[true; 16], &[true; 4], None).unwrap();
            let r = solve_dc(&net, &SolverOptions::default()).unwrap();
            let total: f64 = r.column_currents.iter().sum();
            let src = r.source_current(&net);
            assert!((src - total).abs() <= 1e-12 * total, "{src:e} {total:e}");
        }
    }

    #[test]
    fn superposition() {
        let mut cfg = CrossbarConfig::new(Technology::Fefet, 2, 2);
        cfg.topology = Topology::DrainInput;
        let cell = cfg.bit_cell().unwrap();
        let w = [true, false, true, true];
        let solve = |x: [bool; 2]| {
            let net = build(&cfg, &cell, &w, &x, None).unwrap();
            solve_dc(&net, &SolverOptions::default()).unwrap().column_currents
        };
        let both = solve([true, true]);
        let a = solve([true, false]);
        let b = solve([false, true]);
        for j in 0..2 {
            assert!((both[j] - a[j] - b[j]).abs() <= 1e-11 * both[j]);
        }
    }

    #[test]
    fn ladder_matches_general_solve() {
        for tech in Technology::ALL {
            let cfg = CrossbarConfig::new(tech, 16, 5);
            let s = ArraySolver::new(&cfg, &SolverOptions::default()).unwrap();
            assert!(s.ladder.is_some());
            let mut rng = crate::rng::stream(3, crate::rng::Purpose::Workload, tech as u64);
            let w: Vec<bool> = (0..80).map(|_| crate::rng::bernoulli(&mut rng, 0.5)).collect();
            let x: Vec<bool> = (0..16).map(|_| crate::rng::bernoulli(&mut rng, 0.5)).collect();
            let f: Vec<f64> = (0..80).map(|k| 1.0 + 0.01 * (k % 7) as f64).collect();
            let fast = s.column_currents(&w, &x, Some(&f)).unwrap();
            let slow = s.solve(&w, &x, Some(&f)).unwrap().column_currents;
            for (a, b) in fast.iter().zip(&slow) {
                assert!(((a - b) / b).abs() < 1e-10, "{tech}: {a} vs {b}");
            }
        }
        let mut zero = CrossbarConfig::new(Technology::Fefet, 4, 4);
        zero.parasitics = Parasitics::zero();
        let s = ArraySolver::new(&zero, &SolverOptions::default()).unwrap();
        let (w, x) = ([true, false, true, true].repeat(4), [true, true, false, true]);
        let fast = s.column_currents(&w, &x, None).unwrap();
        let slow = s.solve(&w, &x, None).unwrap().column_currents;
        for (a, b) in fast.iter().zip(&slow) {
            assert!(((a - b) / b).abs() < 1e-12);
        }
        zero.parasitics.wire_res = 1.0;
        let s = ArraySolver::new(&zero, &SolverOptions::default()).unwrap();
        let fast = s.column_currents(&w, &x, None).unwrap();
        let slow = s.solve(&w, &x, None).unwrap().column_currents;
        for (a, b) in fast.iter().zip(&slow) {
            assert!(((a - b) / b).abs() < 1e-10);
        }
    }

    #[test]
    fn plan_rejects_other_structure() {
        let cfg = CrossbarConfig::new(Technology::Sram, 2, 2);
        let cell = cfg.bit_cell().unwrap();
        let a = build(&cfg, &cell, &[true; 4], &[true; 2], None).unwrap();
        let plan = Plan::new(&a).unwrap();
        let cfg3 = CrossbarConfig::new(Technology::Sram, 3, 2);
        let b = build(&cfg3, &cell, &[true; 6], &[true; 3], None).unwrap();
        assert!(plan.solve(&b, &SolverOptions::default()).is_err());
    }

    #[test]
    fn ideal_output_examples() {
        let g = 1.0 / 60e3;
        let full = ideal_output(&[true; 64], &[true; 64], 0.25, g).unwrap();
        assert!((full[0] - 266.666_666_666e-6).abs() < 1e-12);
        let one = ideal_output(&[true], &[true], 0.25, g).unwrap();
        assert!((one[0] - 4.1667e-6).abs() < 1e-9);
        let zero = ideal_output(&[false; 4], &[true; 8], 0.25, g).unwrap();
        assert!(zero.iter().all(|&i| i == 0.0));
    }
}
