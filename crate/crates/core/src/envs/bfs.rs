use std::collections::VecDeque;

use super::grid::{Cell, GridSpec, Pos};

/// Distance assigned to walls (and to cells no water can reach).
pub const UNREACHABLE: u32 = u32::MAX;

/// Multi-source BFS from every water cell over 4-connectivity, passing
/// through any non-wall cell. Returned row-major, `height` rows of `width`.
pub fn bfs_water_distance(spec: &GridSpec) -> Vec<Vec<u32>> {
    let (w, h) = (spec.width(), spec.height());
    let mut dist = vec![vec![UNREACHABLE; w]; h];
    let mut queue = VecDeque::new();
    for p in spec.water_cells() {
        dist[p.y][p.x] = 0;
        queue.push_back(p);
    }
    while let Some(p) = queue.pop_front() {
        let d = dist[p.y][p.x];
        for n in neighbours(p, w, h) {
            if spec.cell(n) != Cell::Wall && dist[n.y][n.x] == UNREACHABLE {
                dist[n.y][n.x] = d + 1;
                queue.push_back(n);
            }
        }
    }
    dist
}

pub(crate) fn neighbours(p: Pos, w: usize, h: usize) -> impl Iterator<Item = Pos> {
    let mut out = [None; 4];
    if p.x > 0 {
        out[0] = Some(Pos::new(p.x - 1, p.y));
    }
    if p.x + 1 < w {
        out[1] = Some(Pos::new(p.x + 1, p.y));
    }
    if p.y > 0 {
        out[2] = Some(Pos::new(p.x, p.y - 1));
    }
    if p.y + 1 < h {
        out[3] = Some(Pos::new(p.x, p.y + 1));
    }
    out.into_iter().flatten()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_hand_case() {
        let g = GridSpec::parse("######\n#A..W#\n#G...#\n######\n").unwrap();
        let d = bfs_water_distance(&g);
        assert_eq!(d[1][4], 0);
        assert_eq!(d[1][2], 2);
        assert_eq!(d[2][1], 4);
        assert_eq!(d[0][0], UNREACHABLE);
    }

    #[test]
    fn walls_force_detours() {
        let g = GridSpec::parse("#####\n#W#A#\n#..G#\n#####\n").unwrap();
        let d = bfs_water_distance(&g);
        // Manhattan distance from (3,1) to the water at (1,1) is 2, the path is 4.
        assert_eq!(d[1][3], 4);
        assert_eq!(d[1][2], UNREACHABLE);
    }
}
