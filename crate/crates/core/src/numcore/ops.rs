//! Dense kernels and their vector-Jacobian products.
//!
//! Every contraction accumulates in ascending index order so that
//! single-threaded runs are bit-reproducible.

use crate::error::{Error, Result};

use super::Tensor;

/// Feature layout of a tensor: `[..., F]` or `[..., F, 3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Scalar,
    Vector,
}

fn matrix_dims(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        &[r, c] => Ok((r, c)),
        s => Err(Error::dim(format!("{what} must be rank 2, got {s:?}"))),
    }
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    let (m, n) = matrix_dims(a, "transpose input")?;
    let src = a.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = src[i * n + j];
        }
    }
    Ok(Tensor::from_parts(vec![n, m], out))
}

/// `a[m×k] · b[k×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = matrix_dims(a, "left operand")?;
    let (k2, n) = matrix_dims(b, "right operand")?;
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul inner extents disagree: {m}×{k} by {k2}×{n}"
        )));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            for (o, &bv) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    Ok(Tensor::from_parts(vec![m, n], out))
}

/// Gradients of `matmul(a, b)` given the output gradient.
pub fn matmul_vjp(a: &Tensor, b: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let (m, _) = matrix_dims(a, "left operand")?;
    let (_, n) = matrix_dims(b, "right operand")?;
    if grad.shape() != [m, n] {
        return Err(Error::dim(format!(
            "matmul output gradient has shape {:?}, expected [{m}, {n}]",
            grad.shape()
        )));
    }
    let ga = matmul(grad, &transpose(b)?)?;
    let gb = matmul(&transpose(a)?, grad)?;
    Ok((ga, gb))
}

struct LinearDims {
    out_features: usize,
    in_features: usize,
    rows: usize,
    lead: Vec<usize>,
}

fn linear_dims(w: &Tensor, x: &Tensor, form: Form) -> Result<LinearDims> {
    let (fo, fi) = matrix_dims(w, "weight")?;
    let shape = x.shape();
    let (lead, feat) = match form {
        Form::Scalar => match shape.split_last() {
            Some((&f, lead)) => (lead, f),
            None => return Err(Error::dim("scalar-form input must have rank ≥ 1")),
        },
        Form::Vector => {
            if shape.len() < 2 || shape[shape.len() - 1] != 3 {
                return Err(Error::dim(format!(
                    "vector-form input must end in [F, 3], got {shape:?}"
                )));
            }
            (&shape[..shape.len() - 2], shape[shape.len() - 2])
        }
    };
    if feat != fi {
        return Err(Error::dim(format!(
            "weight expects {fi} input features, input has {feat}"
        )));
    }
    Ok(LinearDims {
        out_features: fo,
        in_features: fi,
        rows: lead.iter().product(),
        lead: lead.to_vec(),
    })
}

fn check_bias(bias: &Tensor, fo: usize, form: Form) -> Result<()> {
    let ok = match form {
        Form::Scalar => bias.shape() == [fo],
        Form::Vector => bias.shape() == [fo, 3],
    };
    if ok {
        Ok(())
    } else {
        Err(Error::dim(format!(
            "bias shape {:?} does not match {fo} output features ({form:?} form)",
            bias.shape()
        )))
    }
}

/// Dense map over the feature axis.
///
/// For vector-form input the same weights act on each of the three spatial
/// components; the spatial axis is never mixed.
pub fn linear_feature(w: &Tensor, bias: Option<&Tensor>, x: &Tensor, form: Form) -> Result<Tensor> {
    let d = linear_dims(w, x, form)?;
    if let Some(b) = bias {
        check_bias(b, d.out_features, form)?;
    }
    let (fo, fi) = (d.out_features, d.in_features);
    let wt = transpose(w)?;
    let wt = wt.data();
    let xd = x.data();
    let mut out = vec![0.0; d.rows * fo * form_width(form)];
    let mut acc = vec![0.0; fo];
    let mut row = vec![0.0; fi];

    for r in 0..d.rows {
        for axis in 0..form_width(form) {
            for (f, slot) in row.iter_mut().enumerate() {
                *slot = match form {
                    Form::Scalar => xd[r * fi + f],
                    Form::Vector => xd[(r * fi + f) * 3 + axis],
                };
            }
            acc.iter_mut().for_each(|v| *v = 0.0);
            for (f, &xv) in row.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (a, &wv) in acc.iter_mut().zip(&wt[f * fo..(f + 1) * fo]) {
                    *a += xv * wv;
                }
            }
            for (o, &a) in acc.iter().enumerate() {
                let (k, b) = match form {
                    Form::Scalar => (r * fo + o, bias.map_or(0.0, |b| b.data()[o])),
                    Form::Vector => ((r * fo + o) * 3 + axis, bias.map_or(0.0, |b| b.data()[o * 3 + axis])),
                };
                out[k] = a + b;
            }
        }
    }

    let mut shape = d.lead;
    shape.push(fo);
    if form == Form::Vector {
        shape.push(3);
    }
    Ok(Tensor::from_parts(shape, out))
}

fn form_width(form: Form) -> usize {
    match form {
        Form::Scalar => 1,
        Form::Vector => 3,
    }
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub weight: Tensor,
    pub bias: Tensor,
    /// Present only when requested.
    pub input: Option<Tensor>,
}

/// Gradients of [`linear_feature`] with respect to weight, bias and input.
pub fn linear_feature_vjp(w: &Tensor, x: &Tensor, form: Form, grad: &Tensor, want_input: bool) -> Result<LinearGrads> {
    let d = linear_dims(w, x, form)?;
    let (fo, fi) = (d.out_features, d.in_features);
    let width = form_width(form);
    if grad.len() != d.rows * fo * width {
        return Err(Error::dim(format!(
            "output gradient has {} entries, expected {}",
            grad.len(),
            d.rows * fo * width
        )));
    }
    let (wd, xd, gd) = (w.data(), x.data(), grad.data());
    let mut gw = vec![0.0; fo * fi];
    let mut gb = vec![0.0; fo * width];
    let mut gx = if want_input { vec![0.0; x.len()] } else { Vec::new() };
    let mut xrow = vec![0.0; fi];
    let mut grow = vec![0.0; fo];
    let mut gxrow = vec![0.0; fi];

    for r in 0..d.rows {
        for axis in 0..width {
            for (f, slot) in xrow.iter_mut().enumerate() {
                *slot = xd[(r * fi + f) * width + axis];
            }
            for (o, slot) in grow.iter_mut().enumerate() {
                *slot = gd[(r * fo + o) * width + axis];
            }
            gxrow.iter_mut().for_each(|v| *v = 0.0);
            for (o, &gv) in grow.iter().enumerate() {
                gb[o * width + axis] += gv;
                if gv == 0.0 {
                    continue;
                }
                for (g, &xv) in gw[o * fi..(o + 1) * fi].iter_mut().zip(&xrow) {
                    *g += gv * xv;
                }
                if want_input {
                    for (g, &wv) in gxrow.iter_mut().zip(&wd[o * fi..(o + 1) * fi]) {
                        *g += gv * wv;
                    }
                }
            }
            if want_input {
                for (f, &g) in gxrow.iter().enumerate() {
                    gx[(r * fi + f) * width + axis] = g;
                }
            }
        }
    }

    let bias_shape = match form {
        Form::Scalar => vec![fo],
        Form::Vector => vec![fo, 3],
    };
    Ok(LinearGrads {
        weight: Tensor::from_parts(vec![fo, fi], gw),
        bias: Tensor::from_parts(bias_shape, gb),
        input: want_input.then(|| Tensor::from_parts(x.shape().to_vec(), gx)),
    })
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "elementwise operands disagree: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(Tensor::from_parts(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    ))
}

pub fn relu(x: &Tensor) -> Tensor {
    map(x, |v| if v > 0.0 { v } else { 0.0 })
}

/// Subgradient at exactly zero is zero.
pub fn relu_vjp(x: &Tensor, grad: &Tensor) -> Result<Tensor> {
    zip_map(x, grad, |v, g| if v > 0.0 { g } else { 0.0 })
}

pub fn tanh(x: &Tensor) -> Tensor {
    map(x, f64::tanh)
}

/// Takes the activation output `y = tanh(x)`.
pub fn tanh_vjp(y: &Tensor, grad: &Tensor) -> Result<Tensor> {
    zip_map(y, grad, |y, g| g * (1.0 - y * y))
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    map(x, sigmoid_scalar)
}

/// Takes the activation output `y = sigmoid(x)`.
pub fn sigmoid_vjp(y: &Tensor, grad: &Tensor) -> Result<Tensor> {
    zip_map(y, grad, |y, g| g * y * (1.0 - y))
}

fn spatial(r: &Tensor) -> Result<[f64; 3]> {
    match (r.shape(), r.data()) {
        ([3], &[x, y, z]) => Ok([x, y, z]),
        (s, _) => Err(Error::dim(format!("position vector must have shape [3], got {s:?}"))),
    }
}

fn trailing_three(m: &Tensor) -> Result<()> {
    match m.shape().last() {
        Some(3) => Ok(()),
        _ => Err(Error::dim(format!(
            "expected a trailing spatial axis of extent 3, got {:?}",
            m.shape()
        ))),
    }
}

/// Contract the trailing spatial axis with `r`.
pub fn dot3(m: &Tensor, r: &Tensor) -> Result<Tensor> {
    trailing_three(m)?;
    let r = spatial(r)?;
    let out = m
        .data()
        .chunks_exact(3)
        .map(|c| c[0] * r[0] + c[1] * r[1] + c[2] * r[2])
        .collect();
    Ok(Tensor::from_parts(m.shape()[..m.rank() - 1].to_vec(), out))
}

pub fn dot3_vjp(m: &Tensor, r: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    trailing_three(m)?;
    let rv = spatial(r)?;
    if grad.shape() != &m.shape()[..m.rank() - 1] {
        return Err(Error::dim("dot3 output gradient shape mismatch"));
    }
    let mut gm = Vec::with_capacity(m.len());
    let mut gr = [0.0; 3];
    for (c, &g) in m.data().chunks_exact(3).zip(grad.data()) {
        for a in 0..3 {
            gm.push(g * rv[a]);
            gr[a] += g * c[a];
        }
    }
    Ok((
        Tensor::from_parts(m.shape().to_vec(), gm),
        Tensor::from_parts(vec![3], gr.to_vec()),
    ))
}

/// Tensor product with `r`, appending a spatial axis.
pub fn outer3(a: &Tensor, r: &Tensor) -> Result<Tensor> {
    let rv = spatial(r)?;
    let mut out = Vec::with_capacity(a.len() * 3);
    for &v in a.data() {
        out.extend(rv.iter().map(|&c| v * c));
    }
    let mut shape = a.shape().to_vec();
    shape.push(3);
    Ok(Tensor::from_parts(shape, out))
}

pub fn outer3_vjp(a: &Tensor, r: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let rv = spatial(r)?;
    if grad.len() != a.len() * 3 || grad.shape().last() != Some(&3) {
        return Err(Error::dim("outer3 output gradient shape mismatch"));
    }
    let mut ga = Vec::with_capacity(a.len());
    let mut gr = [0.0; 3];
    for (&v, g) in a.data().iter().zip(grad.data().chunks_exact(3)) {
        ga.push(g[0] * rv[0] + g[1] * rv[1] + g[2] * rv[2]);
        for k in 0..3 {
            gr[k] += g[k] * v;
        }
    }
    Ok((
        Tensor::from_parts(a.shape().to_vec(), ga),
        Tensor::from_parts(vec![3], gr.to_vec()),
    ))
}

fn axis_blocks(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, inner)
}

/// Join `a` and `b` along `axis`, `a` first.
pub fn concat_features(a: &Tensor, b: &Tensor, axis: usize) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    let compatible =
        sa.len() == sb.len() && axis < sa.len() && sa.iter().zip(sb).enumerate().all(|(k, (x, y))| k == axis || x == y);
    if !compatible {
        return Err(Error::dim(format!(
            "cannot concatenate {sa:?} and {sb:?} along axis {axis}"
        )));
    }
    let (outer, inner) = axis_blocks(sa, axis);
    let (ca, cb) = (sa[axis] * inner, sb[axis] * inner);
    let mut out = Vec::with_capacity(a.len() + b.len());
    for o in 0..outer {
        out.extend_from_slice(&a.data()[o * ca..(o + 1) * ca]);
        out.extend_from_slice(&b.data()[o * cb..(o + 1) * cb]);
    }
    let mut shape = sa.to_vec();
    shape[axis] += sb[axis];
    Ok(Tensor::from_parts(shape, out))
}

/// Inverse of [`concat_features`]: the first `first` slots of `axis` go left.
pub fn split_features(x: &Tensor, axis: usize, first: usize) -> Result<(Tensor, Tensor)> {
    let shape = x.shape();
    if axis >= shape.len() || first > shape[axis] {
        return Err(Error::dim(format!(
            "cannot split {shape:?} at {first} along axis {axis}"
        )));
    }
    let (outer, inner) = axis_blocks(shape, axis);
    let (ca, cb) = (first * inner, (shape[axis] - first) * inner);
    let mut a = Vec::with_capacity(outer * ca);
    let mut b = Vec::with_capacity(outer * cb);
    for o in 0..outer {
        let block = &x.data()[o * (ca + cb)..(o + 1) * (ca + cb)];
        a.extend_from_slice(&block[..ca]);
        b.extend_from_slice(&block[ca..]);
    }
    let mut shape_a = shape.to_vec();
    shape_a[axis] = first;
    let mut shape_b = shape.to_vec();
    shape_b[axis] -= first;
    Ok((Tensor::from_parts(shape_a, a), Tensor::from_parts(shape_b, b)))
}
