//! Mallows-distributed orderings and Kendall-tau distance.

use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;

use super::MarketError;

/// Offset from the back of an `i`-item prefix, drawn with mass ∝ φ^k on 0..i.
fn insertion_offset<R: Rng + ?Sized>(i: usize, phi: f64, rng: &mut R) -> usize {
    if phi <= 0.0 || i == 1 {
        return 0;
    }
    if phi >= 1.0 {
        return rng.random_range(0..i);
    }
    let u: f64 = rng.random();
    let tail = 1.0 - phi.powi(i as i32);
    let k = ((1.0 - u * tail).ln() / phi.ln()).floor();
    (k.max(0.0) as usize).min(i - 1)
}

/// One exact draw from the Mallows model centred on `reference`.
///
/// Repeated insertion: the i-th reference item is inserted `k` places before
/// the end of the current prefix with probability ∝ φ^k. Final positions are
/// recovered back to front with a Fenwick tree over free slots.
pub fn mallows_sample<T: Copy, R: Rng + ?Sized>(reference: &[T], phi: f64, rng: &mut R) -> Vec<T> {
    let n = reference.len();
    let offsets: Vec<usize> = (1..=n).map(|i| insertion_offset(i, phi, rng)).collect();
    let mut free = FreeSlots::new(n);
    let mut out: Vec<Option<T>> = vec![None; n];
    for i in (0..n).rev() {
        // 0-based slot among the i+1 slots still free
        let pos = i - offsets[i];
        let slot = free.take_nth(pos);
        out[slot] = Some(reference[i]);
    }
    out.into_iter().map(|x| x.expect("every slot filled")).collect()
}

struct FreeSlots {
    tree: Vec<usize>,
    log: usize,
}

impl FreeSlots {
    fn new(n: usize) -> Self {
        let mut tree = vec![0; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                tree[j] += tree[i];
            }
        }
        let log = usize::BITS as usize - n.leading_zeros() as usize;
        FreeSlots { tree, log }
    }

    fn take_nth(&mut self, nth: usize) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut rem = nth + 1;
        for b in (0..=self.log).rev() {
            let next = pos + (1 << b);
            if next <= n && self.tree[next] < rem {
                pos = next;
                rem -= self.tree[next];
            }
        }
        let mut i = pos + 1;
        while i <= n {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
        pos
    }
}

/// Number of pairs ordered one way in `a` and the other way in `b`.
pub fn kendall_tau<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<u64, MarketError> {
    if a.len() != b.len() {
        return Err(MarketError::OrderingMismatch);
    }
    let pos: HashMap<&T, usize> = b.iter().enumerate().map(|(i, x)| (x, i)).collect();
    if pos.len() != b.len() {
        return Err(MarketError::OrderingMismatch);
    }
    let mut seq = Vec::with_capacity(a.len());
    let mut seen = vec![false; a.len()];
    for x in a {
        let &p = pos.get(x).ok_or(MarketError::OrderingMismatch)?;
        if std::mem::replace(&mut seen[p], true) {
            return Err(MarketError::OrderingMismatch);
        }
        seq.push(p);
    }
    let mut buf = vec![0; seq.len()];
    Ok(count_inversions(&mut seq, &mut buf))
}

fn count_inversions(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], &mut buf[..mid]) + count_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}
