//! Lattice points of Z^d and the sup-norm shell geometry used by the samplers.

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of Z^d, stored padded with zeros up to [`MAX_DIM`] coordinates.
pub type Site = [i64; MAX_DIM];

pub const ORIGIN: Site = [0; MAX_DIM];

pub fn site_from_slice(coords: &[i64]) -> Site {
    let mut x = ORIGIN;
    x[..coords.len()].copy_from_slice(coords);
    x
}

#[inline]
pub fn add(a: &Site, b: &Site) -> Site {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

#[inline]
pub fn sub(a: &Site, b: &Site) -> Site {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

#[inline]
pub fn neg(a: &Site) -> Site {
    [-a[0], -a[1], -a[2], -a[3]]
}

#[inline]
pub fn norm_sq(x: &Site) -> f64 {
    x.iter().map(|&c| (c as f64) * (c as f64)).sum()
}

#[inline]
pub fn euclidean(x: &Site) -> f64 {
    norm_sq(x).sqrt()
}

#[inline]
pub fn sup_norm(x: &Site) -> i64 {
    x.iter().map(|c| c.abs()).max().unwrap_or(0)
}

/// Number of points of the cube [-a, a]^d; zero for a < 0.
pub fn cube_count(a: i64, d: usize) -> u128 {
    if a < 0 {
        0
    } else {
        (2 * a as u128 + 1).pow(d as u32)
    }
}

/// Number of points with sup-norm exactly `a`.
pub fn shell_count(a: i64, d: usize) -> u128 {
    cube_count(a, d) - cube_count(a - 1, d)
}

/// Point with index `i` (base-(2a+1) digits, first coordinate most significant) of the cube [-a, a]^d.
fn cube_point(a: i64, d: usize, mut i: u128, out: &mut [i64]) {
    let side = 2 * a as u128 + 1;
    for k in (0..d).rev() {
        out[k] = (i % side) as i64 - a;
        i /= side;
    }
}

/// Point with index `i` on the sup-norm shell of radius `a` in dimension `d`.
pub fn shell_point(a: i64, d: usize, i: u128) -> Site {
    let mut x = ORIGIN;
    shell_point_into(a, d, i, &mut x[..d]);
    x
}

fn shell_point_into(a: i64, d: usize, mut i: u128, out: &mut [i64]) {
    if a == 0 {
        out.iter_mut().for_each(|c| *c = 0);
        return;
    }
    if d == 1 {
        out[0] = if i == 0 { -a } else { a };
        return;
    }
    let face = cube_count(a, d - 1);
    if i < face {
        out[0] = -a;
        cube_point(a, d - 1, i, &mut out[1..]);
        return;
    }
    i -= face;
    if i < face {
        out[0] = a;
        cube_point(a, d - 1, i, &mut out[1..]);
        return;
    }
    i -= face;
    let inner = shell_count(a, d - 1);
    out[0] = (i / inner) as i64 - (a - 1);
    shell_point_into(a, d - 1, i % inner, &mut out[1..]);
}

/// Point with index `i` among the points of sup-norm in `[a_lo, ∞)`, ordered shell by shell.
pub fn block_point(a_lo: i64, d: usize, i: u128) -> Site {
    let global = i + cube_count(a_lo - 1, d);
    // smallest a with cube_count(a) > global
    let est = ((global as f64 + 1.0).powf(1.0 / d as f64) - 1.0) / 2.0;
    let mut a = (est.floor() as i64).max(a_lo).max(0);
    while a > a_lo && cube_count(a - 1, d) > global {
        a -= 1;
    }
    while cube_count(a, d) <= global {
        a += 1;
    }
    shell_point(a, d, global - cube_count(a - 1, d))
}

/// Lexicographic iterator over the cube [-radius, radius]^d.
pub struct BoxIter {
    d: usize,
    radius: i64,
    next: Option<Site>,
}

impl BoxIter {
    pub fn new(d: usize, radius: i64) -> Self {
        let mut start = ORIGIN;
        start[..d].iter_mut().for_each(|c| *c = -radius);
        BoxIter {
            d,
            radius,
            next: (radius >= 0).then_some(start),
        }
    }
}

impl Iterator for BoxIter {
    type Item = Site;

    fn next(&mut self) -> Option<Site> {
        let cur = self.next?;
        let mut n = cur;
        let mut k = self.d;
        loop {
            if k == 0 {
                self.next = None;
                break;
            }
            k -= 1;
            if n[k] < self.radius {
                n[k] += 1;
                self.next = Some(n);
                break;
            }
            n[k] = -self.radius;
        }
        Some(cur)
    }
}

/// All signed coordinate permutations of `x` in dimension `d`.
pub fn signed_permutations(x: &Site, d: usize) -> Vec<Site> {
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for p in &perms {
            for k in 0..d {
                if !p.contains(&k) {
                    let mut q = p.clone();
                    q.push(k);
                    next.push(q);
                }
            }
        }
        perms = next;
    }
    let mut out = Vec::with_capacity(perms.len() << d);
    for p in &perms {
        for signs in 0..(1u32 << d) {
            let mut y = ORIGIN;
            for (i, &k) in p.iter().enumerate() {
                let s = if signs >> i & 1 == 1 { -1 } else { 1 };
                y[i] = s * x[k];
            }
            out.push(y);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn shell_points_enumerate_each_shell_once() {
        for d in 1..=3 {
            for a in 0..4 {
                let n = shell_count(a, d);
                let pts: BTreeSet<Site> = (0..n).map(|i| shell_point(a, d, i)).collect();
                assert_eq!(pts.len() as u128, n);
                assert!(pts.iter().all(|x| sup_norm(x) == a));
            }
        }
    }

    #[test]
    fn block_points_cover_shells_in_order() {
        let d = 2;
        let pts: Vec<Site> = (0..cube_count(3, d) - cube_count(0, d))
            .map(|i| block_point(1, d, i))
            .collect();
        let set: BTreeSet<Site> = pts.iter().copied().collect();
        assert_eq!(set.len(), pts.len());
        assert!(pts.windows(2).all(|w| sup_norm(&w[0]) <= sup_norm(&w[1])));
        assert_eq!(sup_norm(pts.last().unwrap()), 3);
        // far shells resolve without enumerating
        let far = block_point(1_000_000, 2, 12_345_678);
        assert!(sup_norm(&far) >= 1_000_000);
    }

    #[test]
    fn box_iter_is_lexicographic() {
        let pts: Vec<Site> = BoxIter::new(2, 1).collect();
        assert_eq!(pts.len(), 9);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(pts[0], [-1, -1, 0, 0]);
    }

    #[test]
    fn signed_permutation_count() {
        assert_eq!(signed_permutations(&[1, 2, 0, 0], 2).len(), 8);
        assert_eq!(signed_permutations(&[1, 2, 3, 0], 3).len(), 48);
    }
}
