//! Connected components and hole filling on binary masks.

use std::collections::VecDeque;

use crate::imgio::BinaryMask;

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];
const NEIGHBORS_4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

fn flood(
    mask: &BinaryMask,
    seed: usize,
    offsets: &[(isize, isize)],
    visited: &mut [bool],
    want: bool,
) -> Vec<usize> {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let bits = mask.bits();
    let mut members = vec![seed];
    let mut queue = VecDeque::from([seed]);
    visited[seed] = true;
    while let Some(i) = queue.pop_front() {
        let (r, c) = ((i as isize) / w, (i as isize) % w);
        for (dr, dc) in offsets {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= h || nc >= w {
                continue;
            }
            let j = (nr * w + nc) as usize;
            if !visited[j] && bits[j] == want {
                visited[j] = true;
                members.push(j);
                queue.push_back(j);
            }
        }
    }
    members
}

/// 8-connected components of the true pixels, in raster order of their
/// first (top-left-most) pixel.
pub fn components_8(mask: &BinaryMask) -> Vec<Vec<usize>> {
    let mut visited = vec![false; mask.bits().len()];
    let mut out = Vec::new();
    for i in 0..mask.bits().len() {
        if mask.bits()[i] && !visited[i] {
            out.push(flood(mask, i, &NEIGHBORS_8, &mut visited, true));
        }
    }
    out
}

/// Largest 8-connected component; ties go to the component whose first
/// pixel has the lowest raster index. `None` when the mask is empty.
pub fn largest_component(mask: &BinaryMask) -> Option<BinaryMask> {
    let comps = components_8(mask);
    let mut best: Option<&Vec<usize>> = None;
    for comp in &comps {
        if best.is_none_or(|b| comp.len() > b.len()) {
            best = Some(comp);
        }
    }
    best.map(|comp| {
        let mut bits = vec![false; mask.bits().len()];
        for &i in comp {
            bits[i] = true;
        }
        BinaryMask::from_raw(mask.width(), mask.height(), bits)
    })
}

/// Fills enclosed holes: background pixels not 4-connected to the raster
/// border become true.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut visited = vec![false; bits.len()];
    let border = (0..w)
        .flat_map(|c| [c, (h - 1) * w + c])
        .chain((0..h).flat_map(|r| [r * w, r * w + w - 1]));
    for i in border {
        if !bits[i] && !visited[i] {
            flood(mask, i, &NEIGHBORS_4, &mut visited, false);
        }
    }
    let filled = bits
        .iter()
        .zip(&visited)
        .map(|(&b, &outside)| b || !outside)
        .collect();
    BinaryMask::from_raw(w, h, filled)
}
