//! Connected components on a single coronal slice.

/// Marker for cells outside every component.
pub const NO_COMPONENT: u32 = u32::MAX;

/// 4-connected components on an `nx x nz` grid indexed `i + nx * k`.
///
/// Cells with key 0 are background; neighbours join only when their keys are
/// equal. Components are numbered in scan order of their first cell.
pub fn components_2d(key: &[u16], nx: usize, nz: usize) -> (Vec<u32>, usize) {
    debug_assert_eq!(key.len(), nx * nz);
    let mut comp = vec![NO_COMPONENT; key.len()];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..key.len() {
        if key[start] == 0 || comp[start] != NO_COMPONENT {
            continue;
        }
        let label = key[start];
        comp[start] = count;
        stack.push(start);
        while let Some(cell) = stack.pop() {
            let i = cell % nx;
            let k = cell / nx;
            let mut visit = |n: usize| {
                if key[n] == label && comp[n] == NO_COMPONENT {
                    comp[n] = count;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(cell - 1);
            }
            if i + 1 < nx {
                visit(cell + 1);
            }
            if k > 0 {
                visit(cell - nx);
            }
            if k + 1 < nz {
                visit(cell + nx);
            }
        }
        count += 1;
    }
    (comp, count as usize)
}
