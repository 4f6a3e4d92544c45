//! Skew multilinear forms on a local frame and the Koszul differential.
//!
//! A [`Form`] stores its values on increasing index tuples of frame
//! elements; other orderings are recovered by sign. The differential is
//! computed from a [`Frame`], which supplies the anchor action of each frame
//! element on functions and the structure functions of frame brackets.

use std::collections::BTreeMap;

use crate::expr::{Expr, Number};

pub trait Frame {
    fn rank(&self) -> usize;

    /// Derivative of `f` along the anchor image of frame element `i`.
    fn anchor_derivative(&self, i: usize, f: &Expr) -> Expr;

    /// Nonzero coefficients `(k, c)` of `[e_i, e_j] = Σ c e_k`.
    fn bracket(&self, i: usize, j: usize) -> Vec<(usize, Expr)>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("differential not available on degree {degree} forms (maximum {max})")]
pub struct DegreeError {
    pub degree: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    rank: usize,
    degree: usize,
    comps: BTreeMap<Vec<usize>, Expr>,
}

/// Sorts `idx` in place and returns the permutation sign, or `None` on a repeat.
pub fn sort_sign(idx: &mut [usize]) -> Option<i64> {
    let mut sign = 1;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// All strictly increasing `k`-tuples from `0..n`.
pub fn increasing_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

impl Form {
    pub fn zero(rank: usize, degree: usize) -> Self {
        Form { rank, degree, comps: BTreeMap::new() }
    }

    pub fn scalar(rank: usize, f: Expr) -> Self {
        let mut out = Form::zero(rank, 0);
        out.set(&[], f);
        out
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Value on the frame tuple `idx`, any order.
    pub fn get(&self, idx: &[usize]) -> Expr {
        assert_eq!(idx.len(), self.degree, "form degree");
        let mut key = idx.to_vec();
        match sort_sign(&mut key) {
            None => Expr::zero(),
            Some(sign) => match self.comps.get(&key) {
                None => Expr::zero(),
                Some(v) if sign == 1 => v.clone(),
                Some(v) => -v,
            },
        }
    }

    /// Sets the value on `idx` (any order; the skew partners follow).
    pub fn set(&mut self, idx: &[usize], value: Expr) {
        assert_eq!(idx.len(), self.degree, "form degree");
        assert!(idx.iter().all(|&i| i < self.rank), "index out of range");
        let mut key = idx.to_vec();
        let sign = sort_sign(&mut key).expect("repeated index in skew form");
        let v = if sign == 1 { value } else { -value };
        if v.is_zero() {
            self.comps.remove(&key);
        } else {
            self.comps.insert(key, v);
        }
    }

    pub fn add_to(&mut self, idx: &[usize], value: Expr) {
        let cur = self.get(idx);
        self.set(idx, cur + value);
    }

    /// Nonzero stored components on increasing tuples.
    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.comps.iter()
    }

    /// Every increasing tuple with its value, zeros included.
    pub fn dense(&self) -> Vec<(Vec<usize>, Expr)> {
        increasing_tuples(self.rank, self.degree)
            .into_iter()
            .map(|t| {
                let v = self.get(&t);
                (t, v)
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Form {
        let mut out = Form::zero(self.rank, self.degree);
        for (k, v) in &self.comps {
            out.set(k, f(v));
        }
        out
    }

    pub fn scale(&self, c: &Expr) -> Form {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Form) -> Form {
        assert_eq!((self.rank, self.degree), (other.rank, other.degree), "form shape");
        let mut out = self.clone();
        for (k, v) in &other.comps {
            out.add_to(k, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Form) -> Form {
        self.add(&other.scale(&Expr::int(-1)))
    }

    /// Keeps only components whose tuple satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(&[usize]) -> bool) -> Form {
        Form { rank: self.rank, degree: self.degree, comps: self.comps.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect() }
    }

    /// Contraction with the vector `Σ v_i e_i` in the first slot.
    pub fn interior(&self, v: &[Expr]) -> Form {
        assert!(self.degree >= 1, "interior product of a function");
        assert_eq!(v.len(), self.rank);
        let mut out = Form::zero(self.rank, self.degree - 1);
        for rest in increasing_tuples(self.rank, self.degree - 1) {
            let mut acc = Vec::new();
            for (i, vi) in v.iter().enumerate() {
                if vi.is_zero() || rest.contains(&i) {
                    continue;
                }
                let mut idx = vec![i];
                idx.extend(&rest);
                acc.push(vi * &self.get(&idx));
            }
            out.set(&rest, Expr::sum(acc));
        }
        out
    }

    /// Wedge product with the normalization `(α∧β)(e_I) = Σ sign · α · β` over shuffles.
    pub fn wedge(&self, other: &Form) -> Form {
        assert_eq!(self.rank, other.rank);
        let (p, q) = (self.degree, other.degree);
        let mut out = Form::zero(self.rank, p + q);
        for (a, va) in &self.comps {
            for (b, vb) in &other.comps {
                let mut idx: Vec<usize> = a.iter().chain(b).copied().collect();
                if let Some(sign) = sort_sign(&mut idx) {
                    out.add_to(&idx, (va * vb).scale(&Number::int(sign)));
                }
            }
        }
        out
    }

    /// The same form expressed on a new frame `f_a = Σ_b T[a][b] e_b`.
    pub fn change_frame(&self, t: &[Vec<Expr>]) -> Form {
        assert_eq!(t.len(), self.rank);
        let mut out = Form::zero(self.rank, self.degree);
        for tuple in increasing_tuples(self.rank, self.degree) {
            let mut total = Vec::new();
            expand_slots(self, t, &tuple, 0, &mut Vec::new(), Expr::one(), &mut total);
            out.set(&tuple, Expr::sum(total));
        }
        out
    }

    /// Applies `f` to every coefficient and rebuilds (e.g. substitution).
    pub fn try_map<E>(&self, f: impl Fn(&Expr) -> Result<Expr, E>) -> Result<Form, E> {
        let mut out = Form::zero(self.rank, self.degree);
        for (k, v) in &self.comps {
            out.set(k, f(v)?);
        }
        Ok(out)
    }
}

fn expand_slots(form: &Form, t: &[Vec<Expr>], tuple: &[usize], slot: usize, chosen: &mut Vec<usize>, weight: Expr, out: &mut Vec<Expr>) {
    if slot == tuple.len() {
        let v = form.get(chosen);
        if !v.is_zero() {
            out.push(weight * v);
        }
        return;
    }
    for (b, coef) in t[tuple[slot]].iter().enumerate() {
        if coef.is_zero() || chosen.contains(&b) {
            continue;
        }
        chosen.push(b);
        expand_slots(form, t, tuple, slot + 1, chosen, &weight * coef, out);
        chosen.pop();
    }
}

/// Koszul differential of `form` with respect to `frame`.
pub fn koszul<F: Frame + ?Sized>(frame: &F, form: &Form) -> Form {
    let n = frame.rank();
    assert_eq!(form.rank(), n, "frame rank");
    let k = form.degree();
    let mut brackets: BTreeMap<(usize, usize), Vec<(usize, Expr)>> = BTreeMap::new();
    if k >= 1 {
        for i in 0..n {
            for j in i + 1..n {
                brackets.insert((i, j), frame.bracket(i, j));
            }
        }
    }
    let mut out = Form::zero(n, k + 1);
    for tuple in increasing_tuples(n, k + 1) {
        let mut terms = Vec::new();
        for (pos, &i) in tuple.iter().enumerate() {
            let mut rest = tuple.clone();
            rest.remove(pos);
            let val = form.get(&rest);
            if val.is_zero() {
                continue;
            }
            let d = frame.anchor_derivative(i, &val);
            terms.push(if pos % 2 == 0 { d } else { -d });
        }
        for a in 0..tuple.len() {
            for b in a + 1..tuple.len() {
                let br = &brackets[&(tuple[a], tuple[b])];
                if br.is_empty() {
                    continue;
                }
                let rest: Vec<usize> = tuple.iter().enumerate().filter(|(p, _)| *p != a && *p != b).map(|(_, &v)| v).collect();
                let sign = if (a + b) % 2 == 0 { 1 } else { -1 };
                for (m, c) in br {
                    let mut idx = vec![*m];
                    idx.extend(&rest);
                    let v = form.get(&idx);
                    if !v.is_zero() {
                        terms.push((c * &v).scale(&Number::int(sign)));
                    }
                }
            }
        }
        out.set(&tuple, Expr::sum(terms));
    }
    out
}
