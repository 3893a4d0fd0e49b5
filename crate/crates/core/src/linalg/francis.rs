//! Real Schur form by Householder reduction to Hessenberg form followed by
//! Francis double-shift QR with exceptional shifts.
//!
//! Works on a private row-major buffer; the caller converts to and from
//! `DMatrix`.

use nalgebra::DMatrix;

use crate::linalg::{c64, C64};

struct Dense {
    n: usize,
    a: Vec<f64>,
}

impl Dense {
    fn from(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = m[(i, j)];
            }
        }
        Dense { n, a }
    }

    fn identity(n: usize) -> Self {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        Dense { n, a }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.a)
    }
}

/// Reduces `h` to upper Hessenberg form in place; returns the accumulated
/// orthogonal factor when requested.
fn hessenberg(h: &mut Dense, want_q: bool) -> Option<Dense> {
    let n = h.n;
    if n < 3 {
        return want_q.then(|| Dense::identity(n));
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h.at(i, m - 1).abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h.at(i, m - 1) / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        // Left update, accumulated row by row for contiguous access.
        let mut f = vec![0.0; n - m];
        for i in m..=high {
            let row = &h.a[i * n + m..i * n + n];
            for (fj, hij) in f.iter_mut().zip(row) {
                *fj += ort[i] * hij;
            }
        }
        for i in m..=high {
            let oi = ort[i] / hh;
            let row = &mut h.a[i * n + m..i * n + n];
            for (hij, fj) in row.iter_mut().zip(&f) {
                *hij -= fj * oi;
            }
        }
        let om = &ort[m..n];
        for i in 0..=high {
            let row = &mut h.a[i * n + m..i * n + n];
            let f = dot(om, row) / hh;
            for (hij, oj) in row.iter_mut().zip(om) {
                *hij -= f * oj;
            }
        }
        ort[m] *= scale;
        h.set(m, m - 1, scale * g);
    }
    if !want_q {
        return None;
    }
    let mut v = Dense::identity(n);
    for m in (1..high).rev() {
        if h.at(m, m - 1) == 0.0 {
            continue;
        }
        for i in (m + 1)..=high {
            ort[i] = h.at(i, m - 1);
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v.at(i, j);
            }
            g = (g / ort[m]) / h.at(m, m - 1);
            for i in m..=high {
                let val = v.at(i, j) + g * ort[i];
                v.set(i, j, val);
            }
        }
    }
    Some(v)
}

/// Dot product with independent partial sums so the loop pipelines.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

pub(crate) struct SchurOutput {
    pub t: DMatrix<f64>,
    pub q: Option<DMatrix<f64>>,
    pub eigenvalues: Vec<C64>,
}

/// Computes the real Schur form (and Schur vectors when `want_q`). Returns
/// `None` if the iteration stalls.
pub(crate) fn real_schur(m: &DMatrix<f64>, want_q: bool) -> Option<SchurOutput> {
    let nn = m.nrows();
    let mut h = Dense::from(m);
    let mut v = hessenberg(&mut h, want_q);
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    if nn == 0 {
        return Some(SchurOutput {
            t: DMatrix::zeros(0, 0),
            q: v.map(|v| v.to_matrix()),
            eigenvalues: Vec::new(),
        });
    }
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let (mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h.at(i, j).abs();
        }
    }

    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let max_total = 60 * nn.max(4);
    let mut n = nn as isize - 1;
    while n >= 0 {
        let nu = n as usize;
        // small subdiagonal element
        let mut l = nu;
        while l > 0 {
            s = h.at(l - 1, l - 1).abs() + h.at(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if h.at(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l > 0 {
            h.set(l, l - 1, 0.0);
        }

        if l == nu {
            let val = h.at(nu, nu) + exshift;
            h.set(nu, nu, val);
            d[nu] = val;
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            w = h.at(nu, nu - 1) * h.at(nu - 1, nu);
            p = (h.at(nu - 1, nu - 1) - h.at(nu, nu)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            let hn = h.at(nu, nu) + exshift;
            h.set(nu, nu, hn);
            let hn1 = h.at(nu - 1, nu - 1) + exshift;
            h.set(nu - 1, nu - 1, hn1);
            x = h.at(nu, nu);

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
                x = h.at(nu, nu - 1);
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                if want_q {
                    for j in (nu - 1)..nn {
                        z = h.at(nu - 1, j);
                        h.set(nu - 1, j, q * z + p * h.at(nu, j));
                        let val = q * h.at(nu, j) - p * z;
                        h.set(nu, j, val);
                    }
                    for i in 0..=nu {
                        z = h.at(i, nu - 1);
                        h.set(i, nu - 1, q * z + p * h.at(i, nu));
                        let val = q * h.at(i, nu) - p * z;
                        h.set(i, nu, val);
                    }
                    let vm = v.as_mut().expect("Schur vectors requested");
                    for i in 0..nn {
                        z = vm.at(i, nu - 1);
                        vm.set(i, nu - 1, q * z + p * vm.at(i, nu));
                        let val = q * vm.at(i, nu) - p * z;
                        vm.set(i, nu, val);
                    }
                    h.set(nu, nu - 1, 0.0);
                }
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h.at(nu, nu);
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h.at(nu - 1, nu - 1);
                w = h.at(nu, nu - 1) * h.at(nu - 1, nu);
            }
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    let val = h.at(i, i) - x;
                    h.set(i, i, val);
                }
                s = h.at(nu, nu - 1).abs() + h.at(nu - 1, nu - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        let val = h.at(i, i) - s;
                        h.set(i, i, val);
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iter += 1;
            if total_iter > max_total {
                return None;
            }

            // two consecutive small subdiagonal elements
            let mut mm = nu - 2;
            loop {
                z = h.at(mm, mm);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h.at(mm + 1, mm) + h.at(mm, mm + 1);
                q = h.at(mm + 1, mm + 1) - z - r - s;
                r = h.at(mm + 2, mm + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if mm == l {
                    break;
                }
                if h.at(mm, mm - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h.at(mm - 1, mm - 1).abs() + z.abs() + h.at(mm + 1, mm + 1).abs()))
                {
                    break;
                }
                mm -= 1;
            }
            for i in (mm + 2)..=nu {
                h.set(i, i - 2, 0.0);
                if i > mm + 2 {
                    h.set(i, i - 3, 0.0);
                }
            }

            // double QR step on rows l..=n, columns mm..=n
            let (row_end, col_start) = if want_q { (nn, 0) } else { (nu + 1, l) };
            for k in mm..nu {
                let notlast = k != nu - 1;
                if k != mm {
                    p = h.at(k, k - 1);
                    q = h.at(k + 1, k - 1);
                    r = if notlast { h.at(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != mm {
                        h.set(k, k - 1, -s * x);
                    } else if l != mm {
                        let val = -h.at(k, k - 1);
                        h.set(k, k - 1, val);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    {
                        let width = row_end - k;
                        let (head, rest) = h.a[k * nn..].split_at_mut(nn);
                        let (mid, tail) = rest.split_at_mut(nn);
                        let r0 = &mut head[k..k + width];
                        let r1 = &mut mid[k..k + width];
                        if notlast {
                            let r2 = &mut tail[k..k + width];
                            for ((a0, a1), a2) in r0.iter_mut().zip(r1.iter_mut()).zip(r2.iter_mut()) {
                                let t = *a0 + q * *a1 + r * *a2;
                                *a0 -= t * x;
                                *a1 -= t * y;
                                *a2 -= t * z;
                            }
                        } else {
                            for (a0, a1) in r0.iter_mut().zip(r1.iter_mut()) {
                                let t = *a0 + q * *a1;
                                *a0 -= t * x;
                                *a1 -= t * y;
                            }
                        }
                    }
                    for i in col_start..=nu.min(k + 3) {
                        let row = &mut h.a[i * nn + k..i * nn + k + if notlast { 3 } else { 2 }];
                        p = x * row[0] + y * row[1];
                        if notlast {
                            p += z * row[2];
                            row[2] -= p * r;
                        }
                        row[0] -= p;
                        row[1] -= p * q;
                    }
                    if let Some(vm) = v.as_mut() {
                        for i in 0..nn {
                            p = x * vm.at(i, k) + y * vm.at(i, k + 1);
                            if notlast {
                                p += z * vm.at(i, k + 2);
                                let val = vm.at(i, k + 2) - p * r;
                                vm.set(i, k + 2, val);
                            }
                            let v0 = vm.at(i, k) - p;
                            vm.set(i, k, v0);
                            let v1 = vm.at(i, k + 1) - p * q;
                            vm.set(i, k + 1, v1);
                        }
                    }
                }
            }
        }
    }
    let mut tm = h.to_matrix();
    for j in 0..nn {
        for i in (j + 2)..nn {
            tm[(i, j)] = 0.0;
        }
    }
    Some(SchurOutput {
        t: tm,
        q: v.map(|v| v.to_matrix()),
        eigenvalues: d.iter().zip(&e).map(|(&re, &im)| c64(re, im)).collect(),
    })
}
