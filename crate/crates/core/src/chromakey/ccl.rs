//! Two-pass connected-component labeling with union-find.

use serde::{Deserialize, Serialize};

use crate::mask::{BinaryMask, Pixel, PixelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

const UNLABELED: u32 = u32::MAX;

/// Maximal connected components of the set pixels, ordered by their first
/// pixel in raster order. Each component's pixels are in raster order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<PixelSet> {
    let (w, h) = (mask.width, mask.height);
    let bits = mask.as_slice();
    let mut labels = vec![UNLABELED; w * h];
    let mut sets = DisjointSet::new();

    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !bits[i] {
                continue;
            }
            // already-visited neighbours: W, and NW/N/NE for the row above
            let mut current = UNLABELED;
            let mut visit = |j: usize, labels: &[u32], sets: &mut DisjointSet| {
                let l = labels[j];
                if l == UNLABELED {
                    return;
                }
                if current == UNLABELED {
                    current = l;
                } else if current != l {
                    sets.union(current, l);
                }
            };
            if c > 0 {
                visit(i - 1, &labels, &mut sets);
            }
            if r > 0 {
                visit(i - w, &labels, &mut sets);
                if connectivity == Connectivity::Eight {
                    if c > 0 {
                        visit(i - w - 1, &labels, &mut sets);
                    }
                    if c + 1 < w {
                        visit(i - w + 1, &labels, &mut sets);
                    }
                }
            }
            labels[i] = if current == UNLABELED { sets.make() } else { current };
        }
    }

    // second pass: resolve roots and bucket pixels; roots are numbered in
    // order of first appearance so the output order is raster order
    let mut root_slot = vec![UNLABELED; sets.parent.len()];
    let mut components: Vec<Vec<Pixel>> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == UNLABELED {
            continue;
        }
        let root = sets.find(l) as usize;
        if root_slot[root] == UNLABELED {
            root_slot[root] = components.len() as u32;
            components.push(Vec::new());
        }
        components[root_slot[root] as usize].push(Pixel::new((i / w) as u32, (i % w) as u32));
    }
    components.into_iter().map(PixelSet::from_sorted).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn mask(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        let data = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect();
        BinaryMask::from_vec(w, h, data)
    }

    /// Flood-fill reference labeling.
    fn flood_fill(m: &BinaryMask, conn: Connectivity) -> Vec<PixelSet> {
        let mut seen = vec![false; m.width * m.height];
        let mut out = Vec::new();
        for r in 0..m.height {
            for c in 0..m.width {
                if !m.get(r, c) || seen[r * m.width + c] {
                    continue;
                }
                let mut comp = Vec::new();
                let mut queue = VecDeque::from([(r, c)]);
                seen[r * m.width + c] = true;
                while let Some((y, x)) = queue.pop_front() {
                    comp.push(Pixel::new(y as u32, x as u32));
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if (dy == 0 && dx == 0) || (conn == Connectivity::Four && dy != 0 && dx != 0) {
                                continue;
                            }
                            let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                            if ny < 0 || nx < 0 || ny >= m.height as i64 || nx >= m.width as i64 {
                                continue;
                            }
                            let (ny, nx) = (ny as usize, nx as usize);
                            if m.get(ny, nx) && !seen[ny * m.width + nx] {
                                seen[ny * m.width + nx] = true;
                                queue.push_back((ny, nx));
                            }
                        }
                    }
                }
                out.push(PixelSet::from_pixels(comp));
            }
        }
        out
    }

    #[test]
    fn empty_mask_has_no_components() {
        assert!(connected_components(&BinaryMask::new(5, 4), Connectivity::Eight).is_empty());
    }

    #[test]
    fn separated_blobs() {
        let m = mask(&["##.##", "##.##", "#...#"]);
        let comps = connected_components(&m, Connectivity::Eight);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), 5);
        assert_eq!(comps[1].len(), 5);
    }

    #[test]
    fn diagonal_neighbours_depend_on_connectivity() {
        let m = mask(&["#.", ".#"]);
        assert_eq!(connected_components(&m, Connectivity::Eight).len(), 1);
        assert_eq!(connected_components(&m, Connectivity::Four).len(), 2);
    }

    #[test]
    fn u_shape_needs_label_merging() {
        let m = mask(&["#...#", "#...#", "#####"]);
        let comps = connected_components(&m, Connectivity::Four);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].len(), 9);
    }

    #[test]
    fn connectivity_parses_from_config_values() {
        assert_eq!(Connectivity::try_from(4).unwrap(), Connectivity::Four);
        assert!(Connectivity::try_from(6).is_err());
    }

    proptest! {
        #[test]
        fn matches_flood_fill(
            w in 1usize..24, h in 1usize..24, seed in proptest::collection::vec(any::<bool>(), 576),
            eight in any::<bool>(),
        ) {
            let m = BinaryMask::from_vec(w, h, seed[..w * h].to_vec());
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            prop_assert_eq!(connected_components(&m, conn), flood_fill(&m, conn));
        }
    }
}
