//! Row-major dense kernels shared by the forward and backward passes.

use super::Real;

pub(super) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s = s + *x * *y;
    }
    s
}

#[inline]
pub(super) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// out[n,m] = a[n,k] · b[k,m]
pub(super) fn matmul<T: Real>(a: &[T], b: &[T], out: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &aip) in arow.iter().enumerate() {
            if aip != T::zero() {
                axpy(aip, &b[p * m..(p + 1) * m], orow);
            }
        }
    }
}

/// da[n,k] += g[n,m] · b[k,m]ᵀ
pub(super) fn matmul_grad_a<T: Real>(g: &[T], b: &[T], da: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        let drow = &mut da[i * k..(i + 1) * k];
        for (p, d) in drow.iter_mut().enumerate() {
            *d = *d + dot(grow, &b[p * m..(p + 1) * m]);
        }
    }
}

/// db[k,m] += a[n,k]ᵀ · g[n,m]
pub(super) fn matmul_grad_b<T: Real>(a: &[T], g: &[T], db: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &aip) in arow.iter().enumerate() {
            if aip != T::zero() {
                axpy(aip, grow, &mut db[p * m..(p + 1) * m]);
            }
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub(super) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
