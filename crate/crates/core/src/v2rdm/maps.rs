//! Linear maps from (¹D, ²D) to ¹Q, ²Q and ²G.
//!
//! `²Q[(pq),(rs)] = <a_p a_q a†_s a†_r>` and `²G[(pq),(rs)] = <a†_p a_q a†_s a_r>`,
//! normal ordered with the anticommutation relations. Same-spin ²Q blocks use
//! ordered pairs like ²D; ²G and the alpha-beta blocks use the full `n²` grid.

use super::V2rdmLayout;
use crate::sdp::BlockVector;

/// `constant + Σ coef · X[block](i, j)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    pub constant: f64,
    pub terms: Vec<(usize, usize, usize, f64)>,
}

impl Expr {
    fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    fn add(&mut self, block: usize, i: usize, j: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((block, i, j, coef));
        }
    }

    pub fn value(&self, x: &BlockVector) -> f64 {
        self.constant + self.terms.iter().map(|&(b, i, j, c)| c * x.get(b, i, j)).sum::<f64>()
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

impl V2rdmLayout {
    /// Adds `coef · ²D_σσ^{pq,rs}` for arbitrary orbital indices.
    fn add_d2_same(&self, e: &mut Expr, spin: usize, (p, q): (usize, usize), (r, s): (usize, usize), coef: f64) {
        if let (Some((x, sx)), Some((y, sy))) = (self.pairs.signed_index(p, q), self.pairs.signed_index(r, s)) {
            e.add(self.d2_same[spin], x, y, coef * sx * sy);
        }
    }

    fn add_d2_ab(&self, e: &mut Expr, (p, q): (usize, usize), (r, s): (usize, usize), coef: f64) {
        let n = self.n_orb;
        e.add(self.d2_ab, p * n + q, r * n + s, coef);
    }

    fn add_d1(&self, e: &mut Expr, spin: usize, p: usize, r: usize, coef: f64) {
        e.add(self.d1[spin], p, r, coef);
    }

    /// `¹Q_σ[p,r] = δ_pr − ¹D_σ[p,r]`.
    pub fn q1_expr(&self, spin: usize, p: usize, r: usize) -> Expr {
        let mut e = Expr::constant(delta(p, r));
        self.add_d1(&mut e, spin, p, r, -1.0);
        e
    }

    /// Same-spin `²Q` on ordered pairs `x = (p,q)`, `y = (r,s)`.
    pub fn q2_same_expr(&self, spin: usize, x: usize, y: usize) -> Expr {
        let (p, q) = self.pairs.pairs()[x];
        let (r, s) = self.pairs.pairs()[y];
        let mut e = Expr::constant(delta(p, r) * delta(q, s) - delta(p, s) * delta(q, r));
        self.add_d1(&mut e, spin, p, r, -delta(q, s));
        self.add_d1(&mut e, spin, q, r, delta(p, s));
        self.add_d1(&mut e, spin, s, p, delta(q, r));
        self.add_d1(&mut e, spin, s, q, -delta(p, r));
        self.add_d2_same(&mut e, spin, (r, s), (p, q), 1.0);
        e
    }

    /// Alpha-beta `²Q` on the grid `x = p·n + q` (p alpha, q beta).
    pub fn q2_ab_expr(&self, x: usize, y: usize) -> Expr {
        let n = self.n_orb;
        let (p, q, r, s) = (x / n, x % n, y / n, y % n);
        let mut e = Expr::constant(delta(p, r) * delta(q, s));
        self.add_d1(&mut e, 0, p, r, -delta(q, s));
        self.add_d1(&mut e, 1, q, s, -delta(p, r));
        self.add_d2_ab(&mut e, (r, s), (p, q), 1.0);
        e
    }

    /// Coupled `²G` block: index `σ·n² + p·n + q` for the pair `(p_σ, q_σ)`.
    pub fn g_same_expr(&self, x: usize, y: usize) -> Expr {
        let n = self.n_orb;
        let nn = n * n;
        let (sx, sy) = (x / nn, y / nn);
        let (p, q) = ((x % nn) / n, x % n);
        let (r, s) = ((y % nn) / n, y % n);
        let mut e = Expr::default();
        if sx == sy {
            self.add_d1(&mut e, sx, p, r, delta(q, s));
            self.add_d2_same(&mut e, sx, (p, s), (q, r), 1.0);
        } else if sx == 0 {
            // <a†_pα a_qα a†_sβ a_rβ>
            self.add_d2_ab(&mut e, (p, s), (q, r), 1.0);
        } else {
            // <a†_pβ a_qβ a†_sα a_rα>
            self.add_d2_ab(&mut e, (s, p), (r, q), 1.0);
        }
        e
    }

    /// `²G_αβ[(pq),(rs)] = <a†_pα a_qβ a†_sβ a_rα>`.
    pub fn g_ab_expr(&self, x: usize, y: usize) -> Expr {
        let n = self.n_orb;
        let (p, q, r, s) = (x / n, x % n, y / n, y % n);
        let mut e = Expr::default();
        self.add_d1(&mut e, 0, p, r, delta(q, s));
        self.add_d2_ab(&mut e, (p, s), (r, q), -1.0);
        e
    }

    /// `²G_βα[(pq),(rs)] = <a†_pβ a_qα a†_sα a_rβ>`.
    pub fn g_ba_expr(&self, x: usize, y: usize) -> Expr {
        let n = self.n_orb;
        let (p, q, r, s) = (x / n, x % n, y / n, y % n);
        let mut e = Expr::default();
        self.add_d1(&mut e, 1, p, r, delta(q, s));
        self.add_d2_ab(&mut e, (s, p), (q, r), -1.0);
        e
    }

    /// Every mapped block with the expression of its elements.
    pub(crate) fn mapped_blocks(&self) -> Vec<(usize, usize, Box<dyn Fn(usize, usize) -> Expr + '_>)> {
        let n = self.n_orb;
        let np = self.pairs.len();
        vec![
            (self.q1[0], n, Box::new(move |i, j| self.q1_expr(0, i, j))),
            (self.q1[1], n, Box::new(move |i, j| self.q1_expr(1, i, j))),
            (self.q2_same[0], np, Box::new(move |i, j| self.q2_same_expr(0, i, j))),
            (self.q2_same[1], np, Box::new(move |i, j| self.q2_same_expr(1, i, j))),
            (self.q2_ab, n * n, Box::new(move |i, j| self.q2_ab_expr(i, j))),
            (self.g_same, 2 * n * n, Box::new(move |i, j| self.g_same_expr(i, j))),
            (self.g_ab, n * n, Box::new(move |i, j| self.g_ab_expr(i, j))),
            (self.g_ba, n * n, Box::new(move |i, j| self.g_ba_expr(i, j))),
        ]
    }
}
