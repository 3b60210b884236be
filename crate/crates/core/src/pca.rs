//! Principal component analysis of the RGB channels.
//!
//! The pixels form an `n x 3` data matrix whose columns are zero-meaned;
//! the eigenvectors of its 3x3 sample covariance define the eigenvector
//! space the saliency pipeline works in.

use crate::{Error, Plane, Result, RgbImage, Scalar};

/// Eigen-decomposition of an image's RGB covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis<T> {
    /// Unit eigenvectors, one per row, ordered by descending eigenvalue.
    pub eigvecs: [[T; 3]; 3],
    /// Eigenvalues, descending and clamped at zero.
    pub eigvals: [T; 3],
    /// Per-channel means that were subtracted before projecting.
    pub means: [T; 3],
    /// Trace of the covariance matrix.
    pub trace: T,
}

impl<T: Scalar> PcaBasis<T> {
    pub fn eigvec(&self, i: usize) -> Result<[T; 3]> {
        self.eigvecs
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange(i))
    }
}

/// Fits the eigenbasis of the channel covariance (sample divisor `n - 1`).
///
/// Eigenvectors are sign-normalized so their largest-magnitude component is
/// positive (first such component on exact ties).
pub fn fit_pca<T: Scalar>(img: &RgbImage<T>) -> Result<PcaBasis<T>> {
    let n = img.r.len();
    if n < 2 {
        return Err(Error::TooFewPixels(n));
    }
    let chans = img.channels();
    let means = chans.map(|p| p.mean());
    let mut cov = [[T::zero(); 3]; 3];
    for i in 0..n {
        let v = [0, 1, 2].map(|c| chans[c].as_slice()[i] - means[c]);
        for a in 0..3 {
            for b in a..3 {
                cov[a][b] = cov[a][b] + v[a] * v[b];
            }
        }
    }
    let denom = T::from_count(n - 1);
    for a in 0..3 {
        for b in a..3 {
            cov[a][b] = cov[a][b] / denom;
            cov[b][a] = cov[a][b];
        }
    }
    let trace = cov[0][0] + cov[1][1] + cov[2][2];
    let (vals, vecs) = symmetric_eigen3(cov);

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        vals[b]
            .partial_cmp(&vals[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigvals = order.map(|k| vals[k].max(T::zero()));
    let eigvecs = order.map(|k| sign_normalize([vecs[0][k], vecs[1][k], vecs[2][k]]));
    Ok(PcaBasis {
        eigvecs,
        eigvals,
        means,
        trace,
    })
}

fn sign_normalize<T: Scalar>(v: [T; 3]) -> [T; 3] {
    let mut lead = 0;
    for i in 1..3 {
        if v[i].abs() > v[lead].abs() {
            lead = i;
        }
    }
    if v[lead] < T::zero() {
        v.map(|c| -c)
    } else {
        v
    }
}

/// Projects the zero-meaned pixels onto eigenvector `i` (0-based), giving
/// the `i`-th principal component transform as a plane.
pub fn project_channel<T: Scalar>(
    img: &RgbImage<T>,
    basis: &PcaBasis<T>,
    i: usize,
) -> Result<Plane<T>> {
    let xi = basis.eigvec(i)?;
    let m = basis.means;
    let [r, g, b] = img.channels().map(|p| p.as_slice());
    let data = (0..r.len())
        .map(|k| xi[0] * (r[k] - m[0]) + xi[1] * (g[k] - m[1]) + xi[2] * (b[k] - m[2]))
        .collect();
    Plane::new(img.height(), img.width(), data)
}

/// All three principal component transforms.
pub fn project_all<T: Scalar>(img: &RgbImage<T>, basis: &PcaBasis<T>) -> Result<[Plane<T>; 3]> {
    Ok([
        project_channel(img, basis, 0)?,
        project_channel(img, basis, 1)?,
        project_channel(img, basis, 2)?,
    ])
}

/// Eigenvalues normalized to sum one; uniform thirds when all are zero.
pub fn channel_weights<T: Scalar>(basis: &PcaBasis<T>) -> [T; 3] {
    let total = basis.eigvals[0] + basis.eigvals[1] + basis.eigvals[2];
    if !(total > T::zero()) {
        let third = T::one() / T::lit(3.0);
        return [third; 3];
    }
    basis.eigvals.map(|l| l / total)
}

/// Symmetric 3x3 eigensolver: Householder tridiagonalization followed by the
/// implicit QL algorithm. Returns unsorted eigenvalues and the eigenvectors
/// as matrix columns.
fn symmetric_eigen3<T: Scalar>(a: [[T; 3]; 3]) -> ([T; 3], [[T; 3]; 3]) {
    const N: usize = 3;
    let zero = T::zero();
    let mut v = a;
    let mut d = [zero; N];
    let mut e = [zero; N];

    // Householder reduction to tridiagonal form.
    for j in 0..N {
        d[j] = v[N - 1][j];
    }
    for i in (1..N).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale = scale + d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = zero;
                v[j][i] = zero;
            }
        } else {
            for k in 0..i {
                d[k] = d[k] / scale;
                h = h + d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g = g + v[k][j] * d[k];
                    e[k] = e[k] + v[k][j] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] = v[k][j] - (f * e[k] + g * d[k]);
                }
                d[j] = v[i - 1][j];
                v[i][j] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..N - 1 {
        v[N - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g = g + v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] = v[k][j] - g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = zero;
        }
    }
    for j in 0..N {
        d[j] = v[N - 1][j];
        v[N - 1][j] = zero;
    }
    v[N - 1][N - 1] = T::one();
    e[0] = zero;

    // Implicit QL on the tridiagonal matrix.
    for i in 1..N {
        e[i - 1] = e[i];
    }
    e[N - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..N {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < N - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            for _ in 0..64 {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = zero;
    }
    (d, v)
}
