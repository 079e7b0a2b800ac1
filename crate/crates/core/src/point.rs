//! Fixed-capacity lattice points.

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 6;

/// A point of Z^d stored in a fixed-size array; entries past `d` are zero.
pub type Coords = [i64; MAX_DIM];

pub fn to_coords(v: &[i64]) -> Coords {
    assert!(v.len() <= MAX_DIM, "dimension {} exceeds {MAX_DIM}", v.len());
    let mut c = [0; MAX_DIM];
    c[..v.len()].copy_from_slice(v);
    c
}

#[inline]
pub fn add(a: &Coords, b: &Coords) -> Coords {
    let mut c = *a;
    for (x, y) in c.iter_mut().zip(b) {
        *x += y;
    }
    c
}

#[inline]
pub fn sub(a: &Coords, b: &Coords) -> Coords {
    let mut c = *a;
    for (x, y) in c.iter_mut().zip(b) {
        *x -= y;
    }
    c
}

pub fn sup_norm(c: &[i64]) -> i64 {
    c.iter().map(|x| x.abs()).max().unwrap_or(0)
}

pub fn euclid_norm(c: &[i64]) -> f64 {
    (c.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt()
}

/// Packs a point with |x_i| < 2^15 into a hash key.
#[inline]
pub fn pack(c: &[i64]) -> u128 {
    let mut key = 0u128;
    for &x in c {
        debug_assert!(x.abs() < 1 << 15);
        key = (key << 16) | ((x + (1 << 15)) as u128 & 0xffff);
    }
    key
}
