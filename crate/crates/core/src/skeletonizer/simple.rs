//! Simple-point test on 3x3x3 neighbourhoods via topological numbers.
//!
//! A neighbourhood is a 27-bit mask with bit `(x+1) + 3(y+1) + 9(z+1)` set
//! for foreground offsets `(x, y, z)`; bit 13 is the centre and is ignored.
//! The centre is 26-simple iff T26 = 1 (one 26-component of foreground in
//! N26*) and T6 = 1 (one 6-component of background in N18 that is
//! 6-adjacent to the centre).

use std::sync::OnceLock;

pub const CENTER: u32 = 13;
const ALL_BUT_CENTER: u32 = ((1 << 27) - 1) & !(1 << CENTER);

struct Tables {
    /// 26-neighbours of each cube position, restricted to the cube, centre
    /// excluded.
    adj26: [u32; 27],
    /// 6-neighbours of each cube position, restricted to N18.
    adj6: [u32; 27],
    n18: u32,
    n6: u32,
}

fn pos(x: i32, y: i32, z: i32) -> u32 {
    ((x + 1) + 3 * (y + 1) + 9 * (z + 1)) as u32
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut adj26 = [0u32; 27];
        let mut adj6 = [0u32; 27];
        let mut n18 = 0u32;
        let mut n6 = 0u32;
        let cube = || {
            (-1i32..=1).flat_map(|z| (-1i32..=1).flat_map(move |y| (-1i32..=1).map(move |x| (x, y, z))))
        };
        for (x, y, z) in cube() {
            let l1 = x.abs() + y.abs() + z.abs();
            if l1 == 1 {
                n6 |= 1 << pos(x, y, z);
            }
            if l1 == 1 || l1 == 2 {
                n18 |= 1 << pos(x, y, z);
            }
        }
        for (x, y, z) in cube() {
            let p = pos(x, y, z) as usize;
            for (a, b, c) in cube() {
                let (u, v, w) = (x + a, y + b, z + c);
                if (a, b, c) == (0, 0, 0) || u.abs() > 1 || v.abs() > 1 || w.abs() > 1 {
                    continue;
                }
                let q = pos(u, v, w);
                if q != CENTER {
                    adj26[p] |= 1 << q;
                }
                if a.abs() + b.abs() + c.abs() == 1 && (n18 >> q) & 1 == 1 {
                    adj6[p] |= 1 << q;
                }
            }
        }
        Tables {
            adj26,
            adj6,
            n18,
            n6,
        }
    })
}

/// Grow `seed` within `set` using the adjacency table.
fn flood(seed: u32, set: u32, adj: &[u32; 27]) -> u32 {
    let mut comp = seed;
    let mut frontier = seed;
    while frontier != 0 {
        let mut next = 0u32;
        let mut f = frontier;
        while f != 0 {
            let p = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[p];
        }
        next &= set & !comp;
        comp |= next;
        frontier = next;
    }
    comp
}

/// Number of 26-components of foreground in N26*.
pub fn t26(nbhd: u32) -> usize {
    let t = tables();
    let mut rest = nbhd & ALL_BUT_CENTER;
    let mut n = 0;
    while rest != 0 {
        let seed = rest & rest.wrapping_neg();
        rest &= !flood(seed, rest, &t.adj26);
        n += 1;
    }
    n
}

/// Number of 6-components of background in N18 that touch a face neighbour
/// of the centre.
pub fn t6_background(nbhd: u32) -> usize {
    let t = tables();
    let bg = !nbhd & t.n18;
    let mut faces = bg & t.n6;
    let mut n = 0;
    while faces != 0 {
        let seed = faces & faces.wrapping_neg();
        let comp = flood(seed, bg, &t.adj6);
        faces &= !comp;
        n += 1;
    }
    n
}

/// Whether removing the (foreground) centre preserves topology.
pub fn is_simple_point(nbhd: u32) -> bool {
    t26(nbhd) == 1 && t6_background(nbhd) == 1
}

/// Neighbourhood mask from a predicate over offsets.
pub fn neighborhood(mut fg: impl FnMut(i32, i32, i32) -> bool) -> u32 {
    let mut m = 0u32;
    for z in -1..=1 {
        for y in -1..=1 {
            for x in -1..=1 {
                if (x, y, z) != (0, 0, 0) && fg(x, y, z) {
                    m |= 1 << pos(x, y, z);
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::components::euler_characteristic;
    use crate::volume_io::{betti_numbers, Grid, Volume};
    use rand::{Rng, SeedableRng};

    fn bit(x: i32, y: i32, z: i32) -> u32 {
        1 << pos(x, y, z)
    }

    /// Embed the neighbourhood in a padded 5^3 block and compare the
    /// component count, cavity count and Euler number with and without the
    /// centre.
    fn brute_force_simple(nbhd: u32) -> bool {
        let build = |with_center: bool| {
            let mut v = Volume::filled(Grid::new([5, 5, 5], [1.0; 3]), 0u8);
            for p in 0..27u32 {
                let on = if p == CENTER {
                    with_center
                } else {
                    (nbhd >> p) & 1 == 1
                };
                if on {
                    let (x, y, z) = (p % 3, (p / 3) % 3, p / 9);
                    v.set(x as usize + 1, y as usize + 1, z as usize + 1, 1);
                }
            }
            v
        };
        let (a, b) = (build(true), build(false));
        let (a0, _, a2) = betti_numbers(&a);
        let (b0, _, b2) = betti_numbers(&b);
        a0 == b0 && a2 == b2 && euler_characteristic(&a) == euler_characteristic(&b)
    }

    #[test]
    fn isolated_centre_is_not_simple() {
        assert!(!is_simple_point(0));
    }

    #[test]
    fn single_neighbour_is_simple() {
        for p in 0..27 {
            if p != CENTER {
                assert!(is_simple_point(1 << p), "neighbour {p}");
            }
        }
    }

    #[test]
    fn bridge_is_not_simple() {
        assert!(!is_simple_point(bit(-1, 0, 0) | bit(1, 0, 0)));
        assert!(!is_simple_point(bit(-1, -1, -1) | bit(1, 1, 1)));
        assert!(!brute_force_simple(bit(-1, 0, 0) | bit(1, 0, 0)));
    }

    #[test]
    fn interior_point_is_not_simple() {
        // removing it would open a cavity
        assert!(!is_simple_point(ALL_BUT_CENTER));
        assert!(!brute_force_simple(ALL_BUT_CENTER));
    }

    #[test]
    fn half_space_point_is_simple() {
        let m = neighborhood(|_, _, z| z <= 0);
        assert!(is_simple_point(m));
    }

    #[test]
    fn ring_through_centre_is_not_simple() {
        // the eight in-plane neighbours: deleting the centre opens a hole
        let m = neighborhood(|_, _, z| z == 0);
        assert!(!is_simple_point(m));
        assert!(!brute_force_simple(m));
    }

    #[test]
    fn agrees_with_global_topology_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for density in [0.15, 0.35, 0.5, 0.65, 0.85] {
            for _ in 0..4000 {
                let mut m = 0u32;
                for p in 0..27 {
                    if p != CENTER && rng.random_bool(density) {
                        m |= 1 << p;
                    }
                }
                assert_eq!(is_simple_point(m), brute_force_simple(m), "mask {m:#x}");
            }
        }
    }
}
