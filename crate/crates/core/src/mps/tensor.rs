use ndarray::{Array2, ArrayD, IxDyn};

use crate::linalg::C64;

/// Contracts `a` and `b` over the paired axes; the result carries the free
/// axes of `a` in order followed by the free axes of `b`. The contraction
/// runs as a single matrix product.
pub fn tensordot(a: &ArrayD<C64>, a_axes: &[usize], b: &ArrayD<C64>, b_axes: &[usize]) -> ArrayD<C64> {
    assert_eq!(a_axes.len(), b_axes.len());
    let a_free: Vec<usize> = (0..a.ndim()).filter(|i| !a_axes.contains(i)).collect();
    let b_free: Vec<usize> = (0..b.ndim()).filter(|i| !b_axes.contains(i)).collect();
    let k: usize = a_axes.iter().map(|&i| a.shape()[i]).product();
    for (&i, &j) in a_axes.iter().zip(b_axes) {
        assert_eq!(a.shape()[i], b.shape()[j], "contracted dimensions differ");
    }
    let m: usize = a_free.iter().map(|&i| a.shape()[i]).product();
    let n: usize = b_free.iter().map(|&i| b.shape()[i]).product();

    let a_perm: Vec<usize> = a_free.iter().chain(a_axes).copied().collect();
    let b_perm: Vec<usize> = b_axes.iter().chain(&b_free).copied().collect();
    let am = to_matrix(a, &a_perm, m, k);
    let bm = to_matrix(b, &b_perm, k, n);
    let c = am.dot(&bm);

    let shape: Vec<usize> = a_free
        .iter()
        .map(|&i| a.shape()[i])
        .chain(b_free.iter().map(|&i| b.shape()[i]))
        .collect();
    c.into_shape(IxDyn(&shape)).expect("standard layout product")
}

fn to_matrix(t: &ArrayD<C64>, perm: &[usize], rows: usize, cols: usize) -> Array2<C64> {
    let p = t.view().permuted_axes(IxDyn(perm));
    let owned = p.as_standard_layout().into_owned();
    owned.into_shape((rows, cols)).expect("standard layout")
}

/// Axis permutation returning an owned standard-layout array.
pub fn permute(t: &ArrayD<C64>, perm: &[usize]) -> ArrayD<C64> {
    t.view().permuted_axes(IxDyn(perm)).as_standard_layout().into_owned()
}

pub fn reshape(t: ArrayD<C64>, shape: &[usize]) -> ArrayD<C64> {
    t.as_standard_layout()
        .into_owned()
        .into_shape(IxDyn(shape))
        .expect("element count preserved")
}
