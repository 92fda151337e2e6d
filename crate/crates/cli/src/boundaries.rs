//! Region outlines as integer polylines.

use otseg::LabelMap;

/// Boundaries between differently labeled pixels, traced along pixel edges.
///
/// Points live on the corner lattice: `[x, y]` is the top-left corner of
/// pixel `(x, y)`, so coordinates run up to `width` and `height`. Chains
/// break at junctions and image borders; a closed outline repeats its first
/// point at the end. Collinear interior points are dropped.
pub fn boundary_polylines(lm: &LabelMap) -> Vec<Vec<[u32; 2]>> {
    let (w, h) = (lm.width(), lm.height());
    let stride = w + 1;
    let vid = |x: usize, y: usize| y * stride + x;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = lm.get(x, y);
            if x + 1 < w && lm.get(x + 1, y) != l {
                edges.push((vid(x + 1, y), vid(x + 1, y + 1)));
            }
            if y + 1 < h && lm.get(x, y + 1) != l {
                edges.push((vid(x, y + 1), vid(x + 1, y + 1)));
            }
        }
    }
    if edges.is_empty() {
        return Vec::new();
    }

    // A lattice vertex touches at most four crack edges.
    let nv = stride * (h + 1);
    let mut incident = vec![[usize::MAX; 4]; nv];
    let mut degree = vec![0u8; nv];
    for (e, &(a, b)) in edges.iter().enumerate() {
        for v in [a, b] {
            incident[v][degree[v] as usize] = e;
            degree[v] += 1;
        }
    }

    let mut used = vec![false; edges.len()];
    let walk = |start: usize, first: usize, used: &mut Vec<bool>| {
        let mut chain = vec![start];
        let (mut cur, mut e) = (start, first);
        loop {
            used[e] = true;
            let (a, b) = edges[e];
            cur = if a == cur { b } else { a };
            chain.push(cur);
            if degree[cur] != 2 {
                break;
            }
            match incident[cur][..2].iter().find(|&&f| !used[f]) {
                Some(&f) => e = f,
                None => break,
            }
        }
        chain
    };

    let mut chains = Vec::new();
    for v in 0..nv {
        if degree[v] == 0 || degree[v] == 2 {
            continue;
        }
        for &e in &incident[v][..degree[v] as usize] {
            if !used[e] {
                chains.push(walk(v, e, &mut used));
            }
        }
    }
    for e in 0..edges.len() {
        if !used[e] {
            chains.push(walk(edges[e].0, e, &mut used));
        }
    }

    chains
        .into_iter()
        .map(|chain| {
            let pts: Vec<[u32; 2]> = chain
                .iter()
                .map(|&v| [(v % stride) as u32, (v / stride) as u32])
                .collect();
            simplify(&pts)
        })
        .collect()
}

fn simplify(pts: &[[u32; 2]]) -> Vec<[u32; 2]> {
    let mut out: Vec<[u32; 2]> = Vec::with_capacity(pts.len());
    for &p in pts {
        if out.len() >= 2 {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            let same_x = a[0] == b[0] && b[0] == p[0];
            let same_y = a[1] == b[1] && b[1] == p[1];
            if same_x || same_y {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}
