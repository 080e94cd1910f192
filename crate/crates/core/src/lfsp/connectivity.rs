//! Makes every cluster a single 4-connected region.
//!
//! The largest component of each cluster survives; every other component
//! (and any pixel no cluster reached) is absorbed into the neighbor it shares
//! the longest boundary with. Surviving regions are renumbered in raster
//! order of their first pixel.

use std::collections::{HashMap, VecDeque};

use super::NONE;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }
}

/// Returns the relabeled map and the number of regions.
pub(super) fn enforce(labels: &[u32], width: usize, height: usize) -> (Vec<u32>, usize) {
    let n = width * height;
    let mut comp = vec![usize::MAX; n];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_label.len();
        let label = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (x, y) = (p % width, p / width);
            let mut push = |q: usize| {
                if comp[q] == usize::MAX && labels[q] == label {
                    comp[q] = id;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                push(p - 1);
            }
            if x + 1 < width {
                push(p + 1);
            }
            if y > 0 {
                push(p - width);
            }
            if y + 1 < height {
                push(p + width);
            }
        }
        comp_label.push(label);
        comp_size.push(size);
    }
    let comp_count = comp_label.len();

    // Components are discovered in raster order, so the first largest one
    // per label is the one with the earliest pixel.
    let mut largest: HashMap<u32, usize> = HashMap::new();
    for c in 0..comp_count {
        if comp_label[c] == NONE {
            continue;
        }
        let e = largest.entry(comp_label[c]).or_insert(c);
        if comp_size[c] > comp_size[*e] {
            *e = c;
        }
    }
    let mut kept = vec![false; comp_count];
    for &c in largest.values() {
        kept[c] = true;
    }

    let mut boundary: HashMap<(usize, usize), usize> = HashMap::new();
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            let a = comp[p];
            let mut touch = |q: usize| {
                let b = comp[q];
                if a != b {
                    *boundary.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                }
            };
            if x + 1 < width {
                touch(p + 1);
            }
            if y + 1 < height {
                touch(p + width);
            }
        }
    }
    let mut neighbors: Vec<Vec<(usize, usize)>> = vec![Vec::new(); comp_count];
    let mut pairs: Vec<_> = boundary.into_iter().collect();
    pairs.sort_unstable();
    for ((a, b), len) in pairs {
        neighbors[a].push((b, len));
        neighbors[b].push((a, len));
    }

    let mut uf = UnionFind::new(comp_count);
    let mut has_kept = kept.clone();
    let mut orphans: Vec<usize> = (0..comp_count).filter(|&c| !kept[c]).collect();
    orphans.sort_by_key(|&c| (comp_size[c], c));
    for &c in &orphans {
        let root = uf.find(c);
        if has_kept[root] {
            continue;
        }
        let mut best: Option<(usize, usize)> = None;
        for &(nb, len) in &neighbors[c] {
            let r = uf.find(nb);
            if r != root && best.is_none_or(|(_, l)| len > l) {
                best = Some((r, len));
            }
        }
        if let Some((r, _)) = best {
            uf.parent[root] = r;
            has_kept[r] |= has_kept[root];
        }
    }

    // Groups made only of orphans can remain when an orphan's own boundary
    // touches nothing outside its group; resolve them at group level.
    loop {
        let mut stranded: Vec<usize> = (0..comp_count)
            .filter(|&c| uf.find(c) == c && !has_kept[c])
            .collect();
        if stranded.is_empty() || stranded.len() == (0..comp_count).filter(|&c| uf.find(c) == c).count() {
            break;
        }
        stranded.sort_unstable();
        let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
        for a in 0..comp_count {
            let ra = uf.find(a);
            if has_kept[ra] {
                continue;
            }
            for &(b, len) in &neighbors[a] {
                let rb = uf.find(b);
                if rb != ra {
                    *shared.entry((ra, rb)).or_insert(0) += len;
                }
            }
        }
        for root in stranded {
            let root = uf.find(root);
            if has_kept[root] {
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            let mut candidates: Vec<_> = shared
                .iter()
                .filter(|((a, _), _)| *a == root)
                .map(|((_, b), &len)| (*b, len))
                .collect();
            candidates.sort_unstable();
            for (b, len) in candidates {
                let rb = uf.find(b);
                if rb != root && best.is_none_or(|(_, l)| len > l) {
                    best = Some((rb, len));
                }
            }
            if let Some((r, _)) = best {
                uf.parent[root] = r;
                has_kept[r] |= has_kept[root];
            }
        }
    }

    let mut region_of_root: HashMap<usize, u32> = HashMap::new();
    let mut out = vec![0u32; n];
    for p in 0..n {
        let r = uf.find(comp[p]);
        let next = region_of_root.len() as u32;
        out[p] = *region_of_root.entry(r).or_insert(next);
    }
    let count = region_of_root.len();
    (out, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_connected(labels: &[u32], w: usize, h: usize, id: u32) -> bool {
        let pixels: Vec<usize> = (0..w * h).filter(|&p| labels[p] == id).collect();
        if pixels.is_empty() {
            return false;
        }
        let mut seen = vec![false; w * h];
        let mut stack = vec![pixels[0]];
        seen[pixels[0]] = true;
        let mut reached = 0;
        while let Some(p) = stack.pop() {
            reached += 1;
            let (x, y) = (p % w, p / w);
            let mut nb = Vec::new();
            if x > 0 {
                nb.push(p - 1);
            }
            if x + 1 < w {
                nb.push(p + 1);
            }
            if y > 0 {
                nb.push(p - w);
            }
            if y + 1 < h {
                nb.push(p + w);
            }
            for q in nb {
                if !seen[q] && labels[q] == id {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        reached == pixels.len()
    }

    #[test]
    fn orphan_is_absorbed_by_dominant_neighbor() {
        // Label 0 has a stray pixel inside label 1's area.
        #[rustfmt::skip]
        let labels = vec![
            0, 0, 1, 1,
            0, 0, 1, 0,
            0, 0, 1, 1,
        ];
        let (out, count) = enforce(&labels, 4, 3);
        assert_eq!(count, 2);
        assert_eq!(out[7], out[6]);
        for id in 0..count as u32 {
            assert!(is_connected(&out, 4, 3, id));
        }
    }

    #[test]
    fn unreached_pixels_join_a_region() {
        let labels = vec![0, NONE, 1, 1];
        let (out, count) = enforce(&labels, 4, 1);
        assert_eq!(count, 2);
        assert!(!out.contains(&NONE));
    }

    #[test]
    fn random_maps_become_connected() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (w, h) = (rng.random_range(1..12), rng.random_range(1..12));
            let labels: Vec<u32> = (0..w * h)
                .map(|_| if rng.random_bool(0.05) { NONE } else { rng.random_range(0..4) })
                .collect();
            let distinct = {
                let mut l: Vec<u32> = labels.iter().copied().filter(|&l| l != NONE).collect();
                l.sort_unstable();
                l.dedup();
                l.len()
            };
            let (out, count) = enforce(&labels, w, h);
            assert!(count <= distinct.max(1));
            for id in 0..count as u32 {
                assert!(is_connected(&out, w, h, id), "{labels:?} -> {out:?}");
            }
        }
    }
}
