//! Simplicial meshes in R^n: uniform north-east triangulations of the unit
//! square, geometry queries, and the global facet orientation conventions
//! that shared degrees of freedom rely on.
//!
//! Conventions fixed here and used everywhere else:
//! - facet normals point from the adjacent cell of smaller index to the
//!   larger one; boundary facet normals point outward,
//! - edge tangents run from the smaller global vertex id to the larger.

use std::collections::BTreeMap;
use std::io::Write;
use std::num::NonZeroU32;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};

/// A vertex position in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

/// An n-simplex given by n+1 vertex ids; `orientation` is the sign of the
/// Jacobian determinant of its reference map.
#[derive(Debug, Clone)]
pub struct Cell {
    pub vertex_ids: Vec<usize>,
    pub orientation: f64,
}

/// An (n-1)-subsimplex shared by one or two cells.
///
/// `vertex_ids` are sorted ascending; `global_normal` follows the smaller-to
/// larger-cell convention (outward on the boundary).
#[derive(Debug, Clone)]
pub struct Facet {
    pub vertex_ids: Vec<usize>,
    pub adjacent_cells: Vec<usize>,
    pub global_normal: Vec<f64>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.adjacent_cells.len() == 1
    }
}

/// Immutable simplicial mesh.
#[derive(Debug, Clone)]
pub struct SimplexMesh {
    pub dim: usize,
    pub points: Vec<Point>,
    pub cells: Vec<Cell>,
    pub facets: Vec<Facet>,
    /// All 1-subsimplices as sorted vertex pairs (equals the facet list in 2D).
    pub edges: Vec<[usize; 2]>,
    pub level: u32,
    /// Per cell, the facet ids of its n+1 facets, ordered by the local index
    /// of the opposite vertex.
    cell_facets: Vec<Vec<usize>>,
}

/// Concrete coordinates of one cell, with the affine-map geometry queries.
#[derive(Debug, Clone)]
pub struct CellGeom {
    pub vertices: Vec<Vec<f64>>,
}

impl CellGeom {
    pub fn new(vertices: Vec<Vec<f64>>) -> Self {
        CellGeom { vertices }
    }

    /// Ambient (and simplex) dimension n.
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Columns are the edge vectors x_i - x_0.
    pub fn jacobian(&self) -> Mat<f64> {
        let n = self.dim();
        Mat::from_fn(n, n, |r, c| self.vertices[c + 1][r] - self.vertices[0][r])
    }

    pub fn det_jacobian(&self) -> f64 {
        let j = self.jacobian();
        match self.dim() {
            1 => j[(0, 0)],
            2 => j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)],
            3 => {
                j[(0, 0)] * (j[(1, 1)] * j[(2, 2)] - j[(1, 2)] * j[(2, 1)])
                    - j[(0, 1)] * (j[(1, 0)] * j[(2, 2)] - j[(1, 2)] * j[(2, 0)])
                    + j[(0, 2)] * (j[(1, 0)] * j[(2, 1)] - j[(1, 1)] * j[(2, 0)])
            }
            n => {
                let lu = j.partial_piv_lu();
                let det: f64 = (0..n).map(|i| lu.L()[(i, i)] * lu.U()[(i, i)]).product();
                // partial pivoting contributes the permutation sign
                let sign = perm_sign(lu.P().arrays().0);
                det * sign
            }
        }
    }

    pub fn measure(&self) -> f64 {
        let n = self.dim();
        self.det_jacobian().abs() / factorial(n)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.vertices[0].len();
        let mut c = vec![0.0; n];
        for v in &self.vertices {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        let k = self.vertices.len() as f64;
        c.iter_mut().for_each(|ci| *ci /= k);
        c
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.vertices.len() {
            for j in (i + 1)..self.vertices.len() {
                let s: f64 = self.vertices[i]
                    .iter()
                    .zip(&self.vertices[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d = d.max(s.sqrt());
            }
        }
        d
    }

    /// Barycentric coordinates (lambda_0, ..., lambda_n) of `p`.
    pub fn barycentric(&self, p: &[f64]) -> Result<Vec<f64>> {
        let grads = self.barycentric_gradients()?;
        let mut lambdas = Vec::with_capacity(self.dim() + 1);
        let x0 = &self.vertices[0];
        let mut rest_sum = 0.0;
        for nu in grads.iter().skip(1) {
            let l: f64 = nu.iter().zip(p.iter().zip(x0)).map(|(g, (pi, x0i))| g * (pi - x0i)).sum();
            lambdas.push(l);
            rest_sum += l;
        }
        lambdas.insert(0, 1.0 - rest_sum);
        Ok(lambdas)
    }

    /// Gradients of the barycentric coordinates: row i of the inverse edge
    /// matrix for i = 1..n, and the negated sum for lambda_0.
    pub fn barycentric_gradients(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let det = self.det_jacobian();
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(Error::Geometry(format!(
                "degenerate cell: |det J| = {:.3e}",
                det.abs()
            )));
        }
        let j = self.jacobian();
        let inv = j.partial_piv_lu().solve(&Mat::<f64>::identity(n, n));
        let mut grads = vec![vec![0.0; n]];
        for i in 0..n {
            let nu: Vec<f64> = (0..n).map(|c| inv[(i, c)]).collect();
            for c in 0..n {
                grads[0][c] -= nu[c];
            }
            grads.push(nu);
        }
        Ok(grads)
    }

    /// Physical point from barycentric coordinates.
    pub fn point_from_barycentric(&self, lambda: &[f64]) -> Vec<f64> {
        let n = self.vertices[0].len();
        let mut x = vec![0.0; n];
        for (l, v) in lambda.iter().zip(&self.vertices) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += l * vi;
            }
        }
        x
    }
}

/// Unit tangent frame, unit normal, and measure of a facet.
#[derive(Debug, Clone)]
pub struct FacetGeom {
    pub normal: Vec<f64>,
    pub tangents: Vec<Vec<f64>>,
    pub measure: f64,
    /// Facet vertex coordinates in sorted-global-id order.
    pub vertices: Vec<Vec<f64>>,
}

impl SimplexMesh {
    /// Build a mesh from raw vertices and cell connectivity, deriving the
    /// facet and edge tables with the global orientation conventions.
    pub fn from_cells(dim: usize, coords: Vec<Vec<f64>>, conn: Vec<Vec<usize>>) -> Result<Self> {
        let points: Vec<Point> = coords.into_iter().map(|coords| Point { coords }).collect();
        for p in &points {
            if p.coords.len() != dim || p.coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::Geometry("invalid vertex coordinates".into()));
            }
        }

        let mut cells = Vec::with_capacity(conn.len());
        for ids in &conn {
            if ids.len() != dim + 1 {
                return Err(Error::Geometry("cell must have n+1 vertices".into()));
            }
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != dim + 1 {
                return Err(Error::Geometry("cell has repeated vertices".into()));
            }
            let geom = CellGeom::new(ids.iter().map(|&v| points[v].coords.clone()).collect());
            let det = geom.det_jacobian();
            if det == 0.0 || !det.is_finite() {
                return Err(Error::Geometry("cell with zero Jacobian determinant".into()));
            }
            cells.push(Cell {
                vertex_ids: ids.clone(),
                orientation: det.signum(),
            });
        }

        // facets: all n-subsets of each cell, keyed by sorted vertex ids
        let mut facet_map: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (cid, cell) in cells.iter().enumerate() {
            for skip in 0..cell.vertex_ids.len() {
                let mut key: Vec<usize> = cell
                    .vertex_ids
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                facet_map.entry(key).or_default().push(cid);
            }
        }

        let mut facets = Vec::with_capacity(facet_map.len());
        let mut facet_index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for (key, mut adj) in facet_map {
            adj.sort_unstable();
            adj.dedup();
            if adj.len() > 2 {
                return Err(Error::Geometry("facet shared by more than two cells".into()));
            }
            let normal = global_facet_normal(&points, &cells, &key, &adj)?;
            facet_index.insert(key.clone(), facets.len());
            facets.push(Facet {
                vertex_ids: key,
                adjacent_cells: adj,
                global_normal: normal,
            });
        }

        let mut cell_facets = Vec::with_capacity(cells.len());
        for cell in &cells {
            let mut local = Vec::with_capacity(dim + 1);
            for skip in 0..cell.vertex_ids.len() {
                let mut key: Vec<usize> = cell
                    .vertex_ids
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                local.push(facet_index[&key]);
            }
            cell_facets.push(local);
        }

        // 1-subsimplices
        let mut edge_set: BTreeMap<[usize; 2], ()> = BTreeMap::new();
        for cell in &cells {
            let vs = &cell.vertex_ids;
            for i in 0..vs.len() {
                for j in (i + 1)..vs.len() {
                    let (a, b) = (vs[i].min(vs[j]), vs[i].max(vs[j]));
                    edge_set.insert([a, b], ());
                }
            }
        }
        let edges: Vec<[usize; 2]> = edge_set.into_keys().collect();

        Ok(SimplexMesh {
            dim,
            points,
            cells,
            facets,
            edges,
            level: 0,
            cell_facets,
        })
    }

    /// A mesh holding one simplex (for per-cell constructions in any n).
    pub fn single_cell(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vertices.len() - 1;
        let conn = vec![(0..vertices.len()).collect::<Vec<_>>()];
        Self::from_cells(dim, vertices, conn)
    }

    /// Uniform north-east triangulation of the unit square: level 1 is two
    /// right triangles; every level splits each triangle into four similar
    /// half-sized ones, so there are 2 * 4^(level-1) cells.
    pub fn generate_square_mesh(level: NonZeroU32) -> SimplexMesh {
        let level = level.get();
        let m = 1usize << (level - 1);
        let mm = m as f64;
        let mut coords = Vec::with_capacity((m + 1) * (m + 1));
        for j in 0..=m {
            for i in 0..=m {
                coords.push(vec![i as f64 / mm, j as f64 / mm]);
            }
        }
        let p = |i: usize, j: usize| j * (m + 1) + i;
        let mut conn = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                // each square is cut by the diagonal from its south-east to
                // its north-west corner
                conn.push(vec![p(i, j), p(i + 1, j), p(i, j + 1)]);
                conn.push(vec![p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)]);
            }
        }
        let mut mesh = Self::from_cells(2, coords, conn).expect("structured mesh is valid");
        mesh.level = level;
        mesh
    }

    pub fn cell_geom(&self, cell_id: usize) -> CellGeom {
        CellGeom::new(
            self.cells[cell_id]
                .vertex_ids
                .iter()
                .map(|&v| self.points[v].coords.clone())
                .collect(),
        )
    }

    /// Facet ids of a cell, ordered by the local index of the opposite vertex.
    pub fn facets_of_cell(&self, cell_id: usize) -> &[usize] {
        &self.cell_facets[cell_id]
    }

    /// Unit normal, tangent frame and measure of a facet, under the global
    /// orientation conventions.
    pub fn facet_geometry(&self, facet_id: usize) -> Result<FacetGeom> {
        let facet = &self.facets[facet_id];
        let verts: Vec<Vec<f64>> = facet
            .vertex_ids
            .iter()
            .map(|&v| self.points[v].coords.clone())
            .collect();
        facet_frame(&verts, &facet.global_normal)
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// V - E + K, which is 1 for a simply connected planar mesh.
    pub fn euler_characteristic(&self) -> isize {
        self.num_vertices() as isize - self.num_edges() as isize + self.num_cells() as isize
    }

    /// Plain-text dump: one vertex per line, then one cell per line of
    /// 0-based vertex ids.
    pub fn dump<W: Write>(&self, w: &mut W) -> Result<()> {
        for p in &self.points {
            let line: Vec<String> = p.coords.iter().map(|c| format!("{c}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        for c in &self.cells {
            let line: Vec<String> = c.vertex_ids.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Tangent frame, measure and the (given) unit normal for a facet described
/// by its sorted vertex coordinates.
pub fn facet_frame(verts: &[Vec<f64>], normal: &[f64]) -> Result<FacetGeom> {
    let n = verts[0].len();
    match n {
        2 => {
            let t = sub(&verts[1], &verts[0]);
            let len = norm(&t);
            if len == 0.0 {
                return Err(Error::Geometry("facet with repeated vertices".into()));
            }
            Ok(FacetGeom {
                normal: normal.to_vec(),
                tangents: vec![scale(&t, 1.0 / len)],
                measure: len,
                vertices: verts.to_vec(),
            })
        }
        3 => {
            let e1 = sub(&verts[1], &verts[0]);
            let e2 = sub(&verts[2], &verts[0]);
            let l1 = norm(&e1);
            if l1 == 0.0 {
                return Err(Error::Geometry("facet with repeated vertices".into()));
            }
            let t1 = scale(&e1, 1.0 / l1);
            let proj: f64 = dot(&e2, &t1);
            let mut t2 = sub(&e2, &scale(&t1, proj));
            let l2 = norm(&t2);
            if l2 == 0.0 {
                return Err(Error::Geometry("degenerate (collinear) facet".into()));
            }
            t2 = scale(&t2, 1.0 / l2);
            let area = 0.5 * norm(&cross(&e1, &e2));
            Ok(FacetGeom {
                normal: normal.to_vec(),
                tangents: vec![t1, t2],
                measure: area,
                vertices: verts.to_vec(),
            })
        }
        _ => Err(Error::Geometry(format!(
            "facet geometry not implemented for ambient dimension {n}"
        ))),
    }
}

fn global_facet_normal(
    points: &[Point],
    cells: &[Cell],
    key: &[usize],
    adj: &[usize],
) -> Result<Vec<f64>> {
    let verts: Vec<&[f64]> = key.iter().map(|&v| points[v].coords.as_slice()).collect();
    let n = verts[0].len();
    let mut normal = match n {
        2 => {
            let t = sub(verts[1], verts[0]);
            let len = norm(&t);
            if len == 0.0 {
                return Err(Error::Geometry("zero-length edge".into()));
            }
            vec![t[1] / len, -t[0] / len]
        }
        3 => {
            let e1 = sub(verts[1], verts[0]);
            let e2 = sub(verts[2], verts[0]);
            let c = cross(&e1, &e2);
            let len = norm(&c);
            if len == 0.0 {
                return Err(Error::Geometry("degenerate facet".into()));
            }
            scale(&c, 1.0 / len)
        }
        _ => {
            return Err(Error::Geometry(format!(
                "facet normals not implemented for dimension {n}"
            )))
        }
    };

    // midpoint of the facet
    let mut mid = vec![0.0; n];
    for v in &verts {
        for (mi, vi) in mid.iter_mut().zip(v.iter()) {
            *mi += vi;
        }
    }
    mid.iter_mut().for_each(|mi| *mi /= verts.len() as f64);

    let centroid = |cid: usize| -> Vec<f64> {
        CellGeom::new(
            cells[cid]
                .vertex_ids
                .iter()
                .map(|&v| points[v].coords.clone())
                .collect(),
        )
        .centroid()
    };

    let want_positive = match adj.len() {
        // smaller cell id -> larger cell id
        2 => sub(&centroid(adj[1]), &centroid(adj[0])),
        // outward: away from the only cell
        1 => sub(&mid, &centroid(adj[0])),
        _ => return Err(Error::Geometry("facet with no adjacent cell".into())),
    };
    if dot(&normal, &want_positive) < 0.0 {
        normal.iter_mut().for_each(|c| *c = -*c);
    }
    Ok(normal)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn perm_sign(perm: &[usize]) -> f64 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1.0;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub(crate) fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(l: u32) -> SimplexMesh {
        SimplexMesh::generate_square_mesh(NonZeroU32::new(l).unwrap())
    }

    #[test]
    fn level_one_counts() {
        let mesh = level(1);
        assert_eq!(mesh.num_cells(), 2);
        assert_eq!(mesh.num_vertices(), 4);
        assert_eq!(mesh.num_edges(), 5);
        assert_eq!(mesh.facets.len(), 5);
    }

    #[test]
    fn level_three_counts() {
        let mesh = level(3);
        assert_eq!(mesh.num_cells(), 32);
        assert_eq!(mesh.num_vertices(), 25);
        assert_eq!(mesh.num_edges(), 56);
    }

    #[test]
    fn refinement_counts_and_euler() {
        for l in 1..=5 {
            let mesh = level(l);
            assert_eq!(mesh.num_cells(), 2 * 4usize.pow(l - 1));
            assert_eq!(mesh.euler_characteristic(), 1);
        }
    }

    #[test]
    fn orientation_is_consistent() {
        let mesh = level(3);
        assert!(mesh.cells.iter().all(|c| c.orientation == 1.0));
    }

    #[test]
    fn barycentric_centroid_and_vertices() {
        let mesh = level(2);
        let geom = mesh.cell_geom(3);
        let c = geom.centroid();
        let l = geom.barycentric(&c).unwrap();
        for li in &l {
            assert!((li - 1.0 / 3.0).abs() < 1e-14);
        }
        let l1 = geom.barycentric(&geom.vertices[1]).unwrap();
        assert!((l1[0]).abs() < 1e-14 && (l1[1] - 1.0).abs() < 1e-14 && (l1[2]).abs() < 1e-14);
    }

    #[test]
    fn barycentric_affine_reproduction() {
        let mesh = level(2);
        let geom = mesh.cell_geom(5);
        let mut state = 0x9E3779B97F4A7C15u64;
        for _ in 0..50 {
            let mut rnd = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let p = vec![rnd() * 2.0 - 0.5, rnd() * 2.0 - 0.5];
            let l = geom.barycentric(&p).unwrap();
            let s: f64 = l.iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
            let back = geom.point_from_barycentric(&l);
            assert!((back[0] - p[0]).abs() < 1e-13 && (back[1] - p[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let r = SimplexMesh::from_cells(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![vec![0, 1, 2]],
        );
        assert!(r.is_err());
    }

    #[test]
    fn facet_geometry_examples() {
        // horizontal edge of the reference triangle
        let tri = SimplexMesh::single_cell(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let horiz = tri
            .facets
            .iter()
            .position(|f| f.vertex_ids == vec![0, 1])
            .unwrap();
        let g = tri.facet_geometry(horiz).unwrap();
        assert!((g.tangents[0][0] - 1.0).abs() < 1e-15 && g.tangents[0][1].abs() < 1e-15);
        assert!((g.measure - 1.0).abs() < 1e-15);

        // hypotenuse (1,0)-(0,1): normal is +/- (1,1)/sqrt(2), length sqrt(2)
        let hyp = tri
            .facets
            .iter()
            .position(|f| f.vertex_ids == vec![1, 2])
            .unwrap();
        let g = tri.facet_geometry(hyp).unwrap();
        assert!((g.measure - 2.0f64.sqrt()).abs() < 1e-15);
        let s = 1.0 / 2.0f64.sqrt();
        assert!((g.normal[0].abs() - s).abs() < 1e-15 && (g.normal[1].abs() - s).abs() < 1e-15);
        // boundary facet of a single cell: outward
        assert!(g.normal[0] > 0.0 && g.normal[1] > 0.0);
        // normal orthogonal to tangent
        assert!(dot(&g.normal, &g.tangents[0]).abs() < 1e-15);
    }

    #[test]
    fn reference_face_normal_3d() {
        // apex below the x1-x2 plane, so the x1x2x3 face normal is +e3
        let tet = SimplexMesh::single_cell(vec![
            vec![0.0, 0.0, -1.0],
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let face = tet
            .facets
            .iter()
            .position(|f| f.vertex_ids == vec![1, 2, 3])
            .unwrap();
        let g = tet.facet_geometry(face).unwrap();
        assert!(g.normal[2] > 0.999999999999);
        assert!((g.measure - 0.5).abs() < 1e-15);
        for t in &g.tangents {
            assert!(dot(t, &g.normal).abs() < 1e-14);
        }
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = level(3);
        let b = level(3);
        let mut da = Vec::new();
        let mut db = Vec::new();
        a.dump(&mut da).unwrap();
        b.dump(&mut db).unwrap();
        assert_eq!(da, db);
        for (fa, fb) in a.facets.iter().zip(&b.facets) {
            assert_eq!(fa.vertex_ids, fb.vertex_ids);
            assert_eq!(fa.adjacent_cells, fb.adjacent_cells);
            assert!(fa
                .global_normal
                .iter()
                .zip(&fb.global_normal)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn dump_format() {
        let mesh = level(1);
        let mut out = Vec::new();
        mesh.dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4 + 2);
        assert_eq!(lines[0], "0 0");
        assert_eq!(lines[4], "0 1 2");
    }
}
