//! Reverse-mode autodiff over dense `Array2<f64>` values.
//!
//! Every tensor on the tape is two-dimensional; row vectors are `1 x n`
//! and scalars are `1 x 1`. Each op records a backward closure that maps
//! the upstream gradient to per-parent gradient contributions. Ops panic
//! on non-finite outputs: NaN/Inf anywhere in a forward pass is a bug in
//! the caller, not a recoverable condition.

use ndarray::{concatenate, Array2, Axis};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Var(usize);

type BackwardFn = Box<dyn Fn(&Array2<f64>) -> Vec<(Var, Array2<f64>)>>;

struct Node {
    value: Array2<f64>,
    backward: Option<BackwardFn>,
}

/// A single-use computation graph. Build a forward pass, call
/// [`Tape::backward`], then discard.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn assert_finite(value: &Array2<f64>, op: &str) {
    debug_assert!(
        value.iter().all(|v| v.is_finite()),
        "non-finite value produced by op '{op}'"
    );
    if !value.iter().all(|v| v.is_finite()) {
        panic!("non-finite value produced by op '{op}'");
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let value = self.value(v);
        assert_eq!(value.dim(), (1, 1), "scalar() on non-scalar node");
        value[(0, 0)]
    }

    fn push(&mut self, value: Array2<f64>, backward: Option<BackwardFn>, op: &str) -> Var {
        assert_finite(&value, op);
        self.nodes.push(Node { value, backward });
        Var(self.nodes.len() - 1)
    }

    /// Insert a leaf node. Leaves carry no backward closure; gradients
    /// accumulate into them and are read out by [`Tape::backward`].
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, None, "leaf")
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.leaf(Array2::zeros((rows, cols)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let av = self.value(a).clone();
        let bv = self.value(b).clone();
        assert_eq!(
            av.ncols(),
            bv.nrows(),
            "matmul inner dims {}x{} vs {}x{}",
            av.nrows(),
            av.ncols(),
            bv.nrows(),
            bv.ncols()
        );
        let value = av.dot(&bv);
        let back = move |g: &Array2<f64>| vec![(a, g.dot(&bv.t())), (b, av.t().dot(g))];
        self.push(value, Some(Box::new(back)), "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let back = move |g: &Array2<f64>| vec![(a, g.clone()), (b, g.clone())];
        self.push(value, Some(Box::new(back)), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        let back = move |g: &Array2<f64>| vec![(a, g.clone()), (b, -g)];
        self.push(value, Some(Box::new(back)), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let av = self.value(a).clone();
        let bv = self.value(b).clone();
        let value = &av * &bv;
        let back = move |g: &Array2<f64>| vec![(a, g * &bv), (b, g * &av)];
        self.push(value, Some(Box::new(back)), "mul")
    }

    /// `a * mul + add`, elementwise with scalar coefficients.
    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Var {
        let value = self.value(a).mapv(|x| x * mul + add);
        let back = move |g: &Array2<f64>| vec![(a, g * mul)];
        self.push(value, Some(Box::new(back)), "affine")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.affine(a, c, 0.0)
    }

    /// Broadcast-add a `1 x n` row vector to every row of an `m x n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let rv = self.value(row);
        assert_eq!(rv.nrows(), 1, "add_row expects a 1 x n row vector");
        assert_eq!(rv.ncols(), self.value(a).ncols(), "add_row width mismatch");
        let value = self.value(a) + rv;
        let back = move |g: &Array2<f64>| {
            let row_grad = g.sum_axis(Axis(0)).insert_axis(Axis(0));
            vec![(a, g.clone()), (row, row_grad)]
        };
        self.push(value, Some(Box::new(back)), "add_row")
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        let back = move |g: &Array2<f64>| vec![(a, g.t().to_owned())];
        self.push(value, Some(Box::new(back)), "transpose")
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        let y = value.clone();
        let back = move |g: &Array2<f64>| vec![(a, g * &y.mapv(|t| 1.0 - t * t))];
        self.push(value, Some(Box::new(back)), "tanh")
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let y = value.clone();
        let back = move |g: &Array2<f64>| vec![(a, g * &y.mapv(|s| s * (1.0 - s)))];
        self.push(value, Some(Box::new(back)), "sigmoid")
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let xv = self.value(a).clone();
        let value = xv.mapv(|x| x.max(0.0));
        let back = move |g: &Array2<f64>| vec![(a, g * &xv.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 }))];
        self.push(value, Some(Box::new(back)), "relu")
    }

    pub fn log(&mut self, a: Var) -> Var {
        let xv = self.value(a).clone();
        let value = xv.mapv(f64::ln);
        let back = move |g: &Array2<f64>| vec![(a, g / &xv)];
        self.push(value, Some(Box::new(back)), "log")
    }

    /// Clamp to `[lo, hi]`. Gradient is passed through only strictly inside
    /// the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let xv = self.value(a).clone();
        let value = xv.mapv(|x| x.clamp(lo, hi));
        let back = move |g: &Array2<f64>| {
            vec![(
                a,
                g * &xv.mapv(|x| if x > lo && x < hi { 1.0 } else { 0.0 }),
            )]
        };
        self.push(value, Some(Box::new(back)), "clamp")
    }

    /// Row-wise softmax with a shared column mask. Masked columns are
    /// excluded from the softmax (treated as score -inf) and come out 0.
    /// Panics if every column is masked.
    pub fn softmax_rows_masked(&mut self, a: Var, mask: &[bool]) -> Var {
        let xv = self.value(a);
        assert_eq!(xv.ncols(), mask.len(), "softmax mask length mismatch");
        assert!(mask.iter().any(|&m| m), "softmax with all positions masked");
        let mask = mask.to_vec();
        let mut value = Array2::zeros(xv.raw_dim());
        for (i, row) in xv.rows().into_iter().enumerate() {
            let max = row
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(&x, _)| x)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, &x) in row.iter().enumerate() {
                if mask[j] {
                    let e = (x - max).exp();
                    value[(i, j)] = e;
                    denom += e;
                }
            }
            for j in 0..row.len() {
                value[(i, j)] /= denom;
            }
        }
        let y = value.clone();
        // d/dx softmax: per row, gx = y * (g - <g, y>); masked columns stay 0.
        let back = move |g: &Array2<f64>| {
            let mut gx = Array2::zeros(g.raw_dim());
            for i in 0..g.nrows() {
                let dot: f64 = (0..g.ncols()).map(|j| g[(i, j)] * y[(i, j)]).sum();
                for j in 0..g.ncols() {
                    gx[(i, j)] = y[(i, j)] * (g[(i, j)] - dot);
                }
            }
            vec![(a, gx)]
        };
        self.push(value, Some(Box::new(back)), "softmax")
    }

    /// `x / sum(x)`. Caller guarantees a nonzero sum.
    pub fn normalize_sum(&mut self, a: Var) -> Var {
        let total: f64 = self.value(a).sum();
        assert!(total.abs() > 0.0, "normalize_sum over zero total");
        let value = self.value(a) / total;
        let y = value.clone();
        let back = move |g: &Array2<f64>| {
            let dot: f64 = (g * &y).sum();
            vec![(a, (g - dot) / total)]
        };
        self.push(value, Some(Box::new(back)), "normalize_sum")
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let shape = self.value(a).raw_dim();
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let back = move |g: &Array2<f64>| vec![(a, Array2::from_elem(shape, g[(0, 0)]))];
        self.push(value, Some(Box::new(back)), "sum_all")
    }

    /// Mean over the rows selected by `rows`; result is `1 x n`.
    /// Panics when no row is selected.
    pub fn mean_rows_masked(&mut self, a: Var, rows: &[bool]) -> Var {
        let xv = self.value(a);
        assert_eq!(xv.nrows(), rows.len(), "row mask length mismatch");
        let count = rows.iter().filter(|&&m| m).count();
        assert!(count > 0, "mean over zero selected rows");
        let rows = rows.to_vec();
        let mut value = Array2::zeros((1, xv.ncols()));
        for (i, row) in xv.rows().into_iter().enumerate() {
            if rows[i] {
                for (j, &x) in row.iter().enumerate() {
                    value[(0, j)] += x;
                }
            }
        }
        value /= count as f64;
        let nrows = xv.nrows();
        let back = move |g: &Array2<f64>| {
            let mut gx = Array2::zeros((nrows, g.ncols()));
            for i in 0..nrows {
                if rows[i] {
                    for j in 0..g.ncols() {
                        gx[(i, j)] = g[(0, j)] / count as f64;
                    }
                }
            }
            vec![(a, gx)]
        };
        self.push(value, Some(Box::new(back)), "mean_rows_masked")
    }

    /// Stack same-width values vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(0), &views).expect("concat_rows shape mismatch");
        let splits: Vec<(Var, usize)> = parts
            .iter()
            .map(|&p| (p, self.value(p).nrows()))
            .collect();
        let back = move |g: &Array2<f64>| {
            let mut out = Vec::with_capacity(splits.len());
            let mut offset = 0;
            for &(p, n) in &splits {
                out.push((p, g.slice(ndarray::s![offset..offset + n, ..]).to_owned()));
                offset += n;
            }
            out
        };
        self.push(value, Some(Box::new(back)), "concat_rows")
    }

    /// Stack same-height values horizontally.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("concat_cols shape mismatch");
        let splits: Vec<(Var, usize)> = parts
            .iter()
            .map(|&p| (p, self.value(p).ncols()))
            .collect();
        let back = move |g: &Array2<f64>| {
            let mut out = Vec::with_capacity(splits.len());
            let mut offset = 0;
            for &(p, n) in &splits {
                out.push((p, g.slice(ndarray::s![.., offset..offset + n]).to_owned()));
                offset += n;
            }
            out
        };
        self.push(value, Some(Box::new(back)), "concat_cols")
    }

    /// Select rows by index (with repetition allowed); gradients scatter-add.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Var {
        let xv = self.value(a);
        let ncols = xv.ncols();
        let nrows = xv.nrows();
        for &i in indices {
            assert!(i < nrows, "gather_rows index {i} out of {nrows}");
        }
        let mut value = Array2::zeros((indices.len(), ncols));
        for (out_i, &src_i) in indices.iter().enumerate() {
            value.row_mut(out_i).assign(&xv.row(src_i));
        }
        let indices = indices.to_vec();
        let back = move |g: &Array2<f64>| {
            let mut gx = Array2::zeros((nrows, g.ncols()));
            for (out_i, &src_i) in indices.iter().enumerate() {
                let mut row = gx.row_mut(src_i);
                row += &g.row(out_i);
            }
            vec![(a, gx)]
        };
        self.push(value, Some(Box::new(back)), "gather_rows")
    }

    /// Reverse pass from `loss`, returning the gradient of each requested
    /// node (zeros when the node does not influence the loss).
    pub fn backward(&self, loss: Var, wrt: &[Var]) -> Vec<Array2<f64>> {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::ones(self.nodes[loss.0].value.raw_dim()));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if let Some(back) = &self.nodes[id].backward {
                for (parent, contrib) in back(&g) {
                    match &mut grads[parent.0] {
                        Some(existing) => *existing += &contrib,
                        slot => *slot = Some(contrib),
                    }
                }
            }
            grads[id] = Some(g);
        }
        wrt.iter()
            .map(|&v| {
                grads[v.0]
                    .clone()
                    .unwrap_or_else(|| Array2::zeros(self.nodes[v.0].value.raw_dim()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn matmul_forward_and_grad() {
        let mut t = Tape::new();
        let a = t.leaf(array![[1.0, 2.0], [3.0, 4.0]]);
        let b = t.leaf(array![[5.0], [6.0]]);
        let c = t.matmul(a, b);
        assert_eq!(t.value(c), &array![[17.0], [39.0]]);
        let s = t.sum_all(c);
        let grads = t.backward(s, &[a, b]);
        assert_eq!(grads[0], array![[5.0, 6.0], [5.0, 6.0]]);
        assert_eq!(grads[1], array![[4.0], [6.0]]);
    }

    #[test]
    fn masked_softmax_rows_sum_to_one_and_mask_zero() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0, 3.0], [0.0, 0.0, 100.0]]);
        let y = t.softmax_rows_masked(x, &[true, true, false]);
        let v = t.value(y);
        for i in 0..2 {
            assert_abs_diff_eq!(v.row(i).sum(), 1.0, epsilon = 1e-12);
            assert_eq!(v[(i, 2)], 0.0);
        }
    }

    #[test]
    fn softmax_gradient_matches_finite_difference() {
        let x0 = array![[0.3, -1.2, 0.7]];
        let mask = [true, true, true];
        let f = |x: &Array2<f64>| {
            let mut t = Tape::new();
            let xv = t.leaf(x.clone());
            let y = t.softmax_rows_masked(xv, &mask);
            // weighted scalar so the gradient is nontrivial
            let w = t.leaf(array![[1.0], [2.0], [-0.5]]);
            let s = t.matmul(y, w);
            (t.scalar(s), t, xv, s)
        };
        let (_, t, xv, s) = f(&x0);
        let analytic = &t.backward(s, &[xv])[0];
        let h = 1e-6;
        for j in 0..3 {
            let mut xp = x0.clone();
            xp[(0, j)] += h;
            let mut xm = x0.clone();
            xm[(0, j)] -= h;
            let fd = (f(&xp).0 - f(&xm).0) / (2.0 * h);
            assert_abs_diff_eq!(analytic[(0, j)], fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn gather_rows_accumulates_repeated_indices() {
        let mut t = Tape::new();
        let a = t.leaf(array![[1.0, 0.0], [0.0, 1.0]]);
        let g = t.gather_rows(a, &[0, 0, 1]);
        let s = t.sum_all(g);
        let grads = t.backward(s, &[a]);
        assert_eq!(grads[0], array![[2.0, 2.0], [1.0, 1.0]]);
    }

    #[test]
    fn normalize_sum_grad() {
        let x0 = array![[1.0, 3.0]];
        let run = |x: &Array2<f64>| {
            let mut t = Tape::new();
            let xv = t.leaf(x.clone());
            let y = t.normalize_sum(xv);
            let w = t.leaf(array![[2.0], [5.0]]);
            let s = t.matmul(y, w);
            (t.scalar(s), t, xv, s)
        };
        let (_, t, xv, s) = run(&x0);
        let analytic = &t.backward(s, &[xv])[0];
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x0.clone();
            xp[(0, j)] += h;
            let mut xm = x0.clone();
            xm[(0, j)] -= h;
            let fd = (run(&xp).0 - run(&xm).0) / (2.0 * h);
            assert_abs_diff_eq!(analytic[(0, j)], fd, epsilon = 1e-8);
        }
    }

    #[test]
    #[should_panic(expected = "all positions masked")]
    fn softmax_all_masked_panics() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0]]);
        t.softmax_rows_masked(x, &[false, false]);
    }
}
