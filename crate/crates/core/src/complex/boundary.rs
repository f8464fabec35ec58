//! Boundary rules for simplices and polygons.

use crate::error::{Error, Result};

/// Sign of the permutation that sorts `items` ascending (+1 even, -1 odd).
///
/// Items must be distinct.
pub fn sort_parity(items: &[usize]) -> i8 {
    let mut v = items.to_vec();
    let mut sign = 1i8;
    // selection sort counting swaps; tuples are short
    for i in 0..v.len() {
        let mut min = i;
        for j in (i + 1)..v.len() {
            if v[j] < v[min] {
                min = j;
            }
        }
        if min != i {
            v.swap(i, min);
            sign = -sign;
        }
    }
    sign
}

fn check_distinct(vertices: &[usize], what: &str) -> Result<()> {
    let mut sorted = vertices.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidCell(format!(
            "{what} {vertices:?} repeats a vertex"
        )));
    }
    Ok(())
}

/// Boundary of an oriented simplex `[v_0, ..., v_k]`.
///
/// The face obtained by dropping `v_l` carries sign `(-1)^l`. Faces are
/// returned as sorted vertex tuples with the sign multiplied by the parity of
/// the sorting permutation, so the sign is relative to the ascending
/// orientation of the face.
pub fn boundary_of_simplex(vertices: &[usize]) -> Result<Vec<(Vec<usize>, i8)>> {
    if vertices.len() < 2 {
        return Err(Error::InvalidCell(format!(
            "simplex {vertices:?} has no boundary faces (need at least 2 vertices)"
        )));
    }
    check_distinct(vertices, "simplex")?;
    let faces = (0..vertices.len())
        .map(|l| {
            let face: Vec<usize> = vertices
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != l)
                .map(|(_, &v)| v)
                .collect();
            let alternating = if l % 2 == 0 { 1 } else { -1 };
            let parity = sort_parity(&face);
            let mut sorted = face;
            sorted.sort_unstable();
            (sorted, alternating * parity)
        })
        .collect();
    Ok(faces)
}

/// Boundary of an oriented polygon given by its vertex cycle.
///
/// Each traversed edge `(v_l, v_{l+1})` (cyclically) is reported as the
/// canonical pair `(low, high)` with sign +1 when the traversal runs from low
/// to high and -1 otherwise.
pub fn boundary_of_polygon(cycle: &[usize]) -> Result<Vec<([usize; 2], i8)>> {
    if cycle.len() < 3 {
        return Err(Error::InvalidCell(format!(
            "polygon {cycle:?} needs at least 3 vertices"
        )));
    }
    check_distinct(cycle, "polygon")?;
    let m = cycle.len();
    Ok((0..m)
        .map(|l| {
            let (a, b) = (cycle[l], cycle[(l + 1) % m]);
            if a < b {
                ([a, b], 1)
            } else {
                ([b, a], -1)
            }
        })
        .collect())
}

/// Rotates a polygon cycle so it starts at its smallest vertex, keeping the
/// traversal direction.
pub fn canonical_cycle(cycle: &[usize]) -> Vec<usize> {
    let start = cycle
        .iter()
        .enumerate()
        .min_by_key(|&(_, v)| *v)
        .map(|(i, _)| i)
        .unwrap_or(0);
    cycle[start..].iter().chain(&cycle[..start]).copied().collect()
}
