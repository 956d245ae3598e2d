//! Triangular meshes and the geometric quantities of the two-point flux scheme.
//!
//! A [`RawMesh`] is a conforming triangulation. [`compute_geometry`] turns it
//! into an [`AdmissibleMesh`] whose control volumes are centred at triangle
//! circumcenters. Triangles whose circumcenters coincide (right triangles
//! sharing their hypotenuse, as in the crisscross pattern) are merged into a
//! single control volume, which is the Voronoi-dual treatment of cocircular
//! configurations; otherwise such an edge would have `d_σ = 0`.

use std::collections::HashMap;
use std::fs;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use crate::error::{Error, Result};

/// Relative tolerance used for admissibility and conformity checks.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Twice the signed area of `(a, b, c)`.
fn area2(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let b = b - a;
    let c = c - a;
    let d = 2.0 * b.cross(c);
    let (bb, cc) = (b.norm_sq(), c.norm_sq());
    a + Point::new((c.y * bb - b.y * cc) / d, (b.x * cc - c.x * bb) / d)
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub const fn unit_square() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn check(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite());
        if !finite || self.width() <= 0.0 || self.height() <= 0.0 {
            return Err(Error::DegenerateDomain(format!(
                "[{}, {}] x [{}, {}]",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        Ok(())
    }
}

/// Structured triangulation families of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshPattern {
    /// Each of the `n × n` squares split in four by its diagonals.
    #[default]
    Crisscross,
    /// Rows of vertices with every other row shifted by half a spacing.
    /// Interior triangles are acute; the two boundary columns hold right
    /// triangles whose circumcenter sits on their (internal) hypotenuse.
    Staggered,
}

impl MeshPattern {
    pub fn name(self) -> &'static str {
        match self {
            MeshPattern::Crisscross => "crisscross",
            MeshPattern::Staggered => "staggered",
        }
    }
}

impl std::str::FromStr for MeshPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crisscross" => Ok(MeshPattern::Crisscross),
            "staggered" => Ok(MeshPattern::Staggered),
            other => Err(Error::InvalidParameter(format!("unknown mesh pattern `{other}`"))),
        }
    }
}

/// A conforming triangulation. Triangles are stored counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
}

impl RawMesh {
    /// Validates indices, non-degeneracy and conformity, and orients every
    /// triangle counter-clockwise.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::NonConforming("mesh has no triangles".into()));
        }
        if let Some(p) = vertices.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::NonConforming(format!("non-finite vertex ({}, {})", p.x, p.y)));
        }
        let scale = bounding_diameter(&vertices);
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &i in tri.iter() {
                if i >= nv {
                    return Err(Error::IndexOutOfRange {
                        triangle: t,
                        index: i,
                        count: nv,
                    });
                }
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let twice = area2(a, b, c);
            if twice.abs() <= 1e-14 * scale * scale || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle(t));
            }
            if twice < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mesh = RawMesh {
            vertices,
            triangles,
        };
        mesh.check_conformity(scale)?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| 0.5 * area2(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]))
            .sum()
    }

    /// Maps each undirected edge to the triangles (with local edge slot) using it.
    fn edge_map(&self) -> HashMap<(usize, usize), Vec<(usize, usize)>> {
        let mut map: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::with_capacity(self.triangles.len() * 2);
        for (t, tri) in self.triangles.iter().enumerate() {
            for slot in 0..3 {
                let (a, b) = (tri[slot], tri[(slot + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push((t, slot));
            }
        }
        map
    }

    fn check_conformity(&self, scale: f64) -> Result<()> {
        let map = self.edge_map();
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        for (&(a, b), users) in &map {
            match users.len() {
                1 => boundary.push((a, b)),
                2 => {
                    // both triangles CCW: the shared edge must be traversed in opposite directions
                    let dir = |&(t, slot): &(usize, usize)| self.triangles[t][slot] == a;
                    if dir(&users[0]) == dir(&users[1]) {
                        return Err(Error::NonConforming(format!(
                            "triangles {} and {} overlap across edge ({a}, {b})",
                            users[0].0, users[1].0
                        )));
                    }
                }
                k => {
                    return Err(Error::NonConforming(format!("edge ({a}, {b}) is shared by {k} triangles")));
                }
            }
        }

        let mut boundary_degree: HashMap<usize, usize> = HashMap::new();
        for &(a, b) in &boundary {
            *boundary_degree.entry(a).or_default() += 1;
            *boundary_degree.entry(b).or_default() += 1;
        }
        if let Some((v, d)) = boundary_degree.iter().find(|(_, &d)| d != 2) {
            return Err(Error::NonConforming(format!(
                "vertex {v} touches {d} boundary edges (pinched or disconnected partition)"
            )));
        }

        // hanging nodes sit in the interior of some boundary edge
        let tol = ADMISSIBILITY_TOL * scale;
        for &(a, b) in &boundary {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let len = pa.dist(pb);
            for &v in boundary_degree.keys() {
                if v == a || v == b {
                    continue;
                }
                let p = self.vertices[v];
                let along = (p - pa).dot(pb - pa) / len;
                let off = (p - pa).cross(pb - pa).abs() / len;
                if off <= tol && along > tol && along < len - tol {
                    return Err(Error::NonConforming(format!("hanging node {v} on edge ({a}, {b})")));
                }
            }
        }
        Ok(())
    }
}

fn bounding_diameter(points: &[Point]) -> f64 {
    let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in points {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    if points.is_empty() {
        1.0
    } else {
        (hi - lo).norm().max(f64::MIN_POSITIVE)
    }
}

/// Crisscross triangulation of `domain` with `n` squares per axis.
pub fn build_structured_mesh(domain: Rect, n: usize) -> Result<RawMesh> {
    build_mesh(MeshPattern::Crisscross, domain, n)
}

pub fn build_mesh(pattern: MeshPattern, domain: Rect, n: usize) -> Result<RawMesh> {
    domain.check()?;
    if n == 0 {
        return Err(Error::InvalidParameter("mesh subdivision n must be at least 1".into()));
    }
    match pattern {
        MeshPattern::Crisscross => crisscross(domain, n),
        MeshPattern::Staggered => staggered(domain, n),
    }
}

fn crisscross(domain: Rect, n: usize) -> Result<RawMesh> {
    let (hx, hy) = (domain.width() / n as f64, domain.height() / n as f64);
    let corner = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(domain.x0 + i as f64 * hx, domain.y0 + j as f64 * hy));
        }
    }
    let centers = vertices.len();
    for j in 0..n {
        for i in 0..n {
            vertices.push(Point::new(domain.x0 + (i as f64 + 0.5) * hx, domain.y0 + (j as f64 + 0.5) * hy));
        }
    }
    let mut triangles = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let c = centers + j * n + i;
            let (bl, br, tr, tl) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
            triangles.extend_from_slice(&[[bl, br, c], [br, tr, c], [tr, tl, c], [tl, bl, c]]);
        }
    }
    RawMesh::new(vertices, triangles)
}

fn staggered(domain: Rect, n: usize) -> Result<RawMesh> {
    let (hx, hy) = (domain.width() / n as f64, domain.height() / n as f64);
    let mut vertices = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let y = domain.y0 + j as f64 * hy;
        let xs: Vec<f64> = if j % 2 == 0 {
            (0..=n).map(|i| domain.x0 + i as f64 * hx).collect()
        } else {
            std::iter::once(domain.x0)
                .chain((0..n).map(|i| domain.x0 + (i as f64 + 0.5) * hx))
                .chain(std::iter::once(domain.x1))
                .collect()
        };
        let start = vertices.len();
        vertices.extend(xs.iter().map(|&x| Point::new(x, y)));
        rows.push((start..vertices.len()).collect());
    }
    let mut triangles = Vec::with_capacity(n * (2 * n + 1));
    for j in 0..n {
        let (lo, hi) = (&rows[j], &rows[j + 1]);
        if j % 2 == 0 {
            // regular row below, shifted row above
            let (e, o) = (lo, hi);
            triangles.push([e[0], o[1], o[0]]);
            for i in 0..n {
                triangles.push([e[i], e[i + 1], o[i + 1]]);
            }
            for i in 1..n {
                triangles.push([e[i], o[i + 1], o[i]]);
            }
            triangles.push([e[n], o[n + 1], o[n]]);
        } else {
            let (o, e) = (lo, hi);
            triangles.push([o[0], o[1], e[0]]);
            for i in 0..n {
                triangles.push([o[i + 1], e[i + 1], e[i]]);
            }
            for i in 1..n {
                triangles.push([o[i], o[i + 1], e[i]]);
            }
            triangles.push([o[n], o[n + 1], e[n]]);
        }
    }
    RawMesh::new(vertices, triangles)
}

/// Parses the plain-text mesh format: a `V T` header, `V` lines `x y`, then
/// `T` lines `i j k` with 0-based indices. Lines starting with `#` and blank
/// lines are ignored.
pub fn parse_mesh(text: &str) -> Result<RawMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    fn fields<T: std::str::FromStr>(line: usize, l: &str, want: usize) -> Result<Vec<T>> {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != want {
            return Err(Error::Parse {
                line,
                msg: format!("expected {want} fields, found {}", parts.len()),
            });
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<T>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("cannot parse `{p}`"),
                })
            })
            .collect()
    }

    let (hl, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        msg: "missing `V T` header".into(),
    })?;
    let counts: Vec<usize> = fields(hl, header, 2)?;
    let (nv, nt) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("expected {nv} vertex lines"),
        })?;
        let xy: Vec<f64> = fields(ln, l, 2)?;
        vertices.push(Point::new(xy[0], xy[1]));
    }
    let mut triangles = Vec::with_capacity(nt);
    for t in 0..nt {
        let (ln, l) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("expected {nt} triangle lines"),
        })?;
        let ijk: Vec<usize> = fields(ln, l, 3)?;
        if let Some(&bad) = ijk.iter().find(|&&i| i >= nv) {
            return Err(Error::Parse {
                line: ln,
                msg: format!("triangle {t} references vertex {bad} beyond {nv} vertices"),
            });
        }
        triangles.push([ijk[0], ijk[1], ijk[2]]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse {
            line: ln,
            msg: "trailing data after triangle list".into(),
        });
    }
    RawMesh::new(vertices, triangles)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<RawMesh> {
    parse_mesh(&fs::read_to_string(path)?)
}

pub fn format_mesh(raw: &RawMesh) -> String {
    let mut out = format!("{} {}\n", raw.vertices.len(), raw.triangles.len());
    for p in &raw.vertices {
        out.push_str(&format!("{:.17e} {:.17e}\n", p.x, p.y));
    }
    for t in &raw.triangles {
        out.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub center: Point,
    pub measure: f64,
    pub diameter: f64,
}

/// Internal edge `σ = K|L` with `K < L`. Edge values are attached to the
/// `K → L` orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalEdge {
    pub cells: (usize, usize),
    pub vertices: (usize, usize),
    /// `m_σ`
    pub measure: f64,
    /// `d_σ = |x_K - x_L|`
    pub dist: f64,
    /// `d_{K,σ}`
    pub dist_k: f64,
    /// `d_{L,σ}`
    pub dist_l: f64,
    /// Unit vector from `x_K` to `x_L`.
    pub normal: Point,
}

impl InternalEdge {
    /// `m_σ d_σ`, twice the diamond-cell measure in 2D.
    pub fn diamond_weight(&self) -> f64 {
        self.measure * self.dist
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub cell: usize,
    pub vertices: (usize, usize),
    pub measure: f64,
}

/// An internal edge as seen from one of its cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeRef {
    pub edge: usize,
    /// `true` when the cell is the `K` side of the edge.
    pub is_k: bool,
}

impl EdgeRef {
    /// `+1` on the `K` side, `-1` on the `L` side.
    pub fn sign(self) -> f64 {
        if self.is_k {
            1.0
        } else {
            -1.0
        }
    }
}

/// TPFA-admissible mesh with all precomputed geometry. Immutable once built.
#[derive(Debug, Clone)]
pub struct AdmissibleMesh {
    vertices: Vec<Point>,
    cells: Vec<Cell>,
    edges: Vec<InternalEdge>,
    boundary: Vec<BoundaryEdge>,
    adjacency: Vec<Vec<EdgeRef>>,
    cell_of_triangle: Vec<usize>,
    size: f64,
    area: f64,
}

impl AdmissibleMesh {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn edges(&self) -> &[InternalEdge] {
        &self.edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// `Σ_K`: internal edges of cell `k`.
    pub fn cell_edges(&self, k: usize) -> &[EdgeRef] {
        &self.adjacency[k]
    }

    /// Control volume containing each input triangle.
    pub fn cell_of_triangle(&self) -> &[usize] {
        &self.cell_of_triangle
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.cells.iter().map(|c| c.center)
    }

    /// `h_T`, the largest cell diameter.
    pub fn size(&self) -> f64 {
        self.size
    }

    /// `|Ω|`, the sum of the cell measures.
    pub fn area(&self) -> f64 {
        self.area
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Builds circumcenter-based TPFA geometry for `raw`.
pub fn compute_geometry(raw: &RawMesh) -> Result<AdmissibleMesh> {
    let verts = &raw.vertices;
    let tris = &raw.triangles;

    let mut centers = Vec::with_capacity(tris.len());
    let mut areas = Vec::with_capacity(tris.len());
    for (t, tri) in tris.iter().enumerate() {
        let [a, b, c] = tri.map(|i| verts[i]);
        let twice = area2(a, b, c);
        let cc = circumcenter(a, b, c);
        let bary = [area2(cc, b, c), area2(a, cc, c), area2(a, b, cc)].map(|v| v / twice);
        if bary.iter().any(|&l| l < -ADMISSIBILITY_TOL) {
            return Err(Error::Inadmissible(format!(
                "circumcenter of triangle {t} lies outside it (barycentric {:.3e}, {:.3e}, {:.3e})",
                bary[0], bary[1], bary[2]
            )));
        }
        centers.push(cc);
        areas.push(0.5 * twice);
    }

    let mut edge_list: Vec<((usize, usize), Vec<(usize, usize)>)> = raw.edge_map().into_iter().collect();
    edge_list.sort_unstable_by_key(|(k, _)| *k);

    let mut uf = UnionFind((0..tris.len()).collect());
    for ((a, b), users) in &edge_list {
        if let [(t1, _), (t2, _)] = users[..] {
            let len = verts[*a].dist(verts[*b]);
            if centers[t1].dist(centers[t2]) <= ADMISSIBILITY_TOL * len {
                uf.union(t1, t2);
            }
        }
    }

    let mut cell_of_triangle = vec![usize::MAX; tris.len()];
    let mut root_to_cell = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for t in 0..tris.len() {
        let root = uf.find(t);
        let cell = *root_to_cell.entry(root).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        cell_of_triangle[t] = cell;
        members[cell].push(t);
    }

    let cells: Vec<Cell> = members
        .iter()
        .map(|group| {
            let measure: f64 = group.iter().map(|&t| areas[t]).sum();
            let center = group
                .iter()
                .fold(Point::default(), |acc, &t| acc + centers[t] * (areas[t] / measure));
            let pts: Vec<Point> = group.iter().flat_map(|&t| tris[t].map(|i| verts[i])).collect();
            let mut diameter: f64 = 0.0;
            for (i, p) in pts.iter().enumerate() {
                for q in &pts[i + 1..] {
                    diameter = diameter.max(p.dist(*q));
                }
            }
            Cell {
                center,
                measure,
                diameter,
            }
        })
        .collect();

    let mut edges = Vec::new();
    let mut boundary = Vec::new();
    let mut adjacency = vec![Vec::new(); cells.len()];
    for ((a, b), users) in &edge_list {
        let (pa, pb) = (verts[*a], verts[*b]);
        let measure = pa.dist(pb);
        match users[..] {
            [(t, _)] => boundary.push(BoundaryEdge {
                cell: cell_of_triangle[t],
                vertices: (*a, *b),
                measure,
            }),
            [(t1, _), (t2, _)] => {
                let (c1, c2) = (cell_of_triangle[t1], cell_of_triangle[t2]);
                if c1 == c2 {
                    continue;
                }
                let (k, l) = (c1.min(c2), c1.max(c2));
                let (xk, xl) = (cells[k].center, cells[l].center);
                let dist = xk.dist(xl);
                if dist <= ADMISSIBILITY_TOL * measure {
                    return Err(Error::Inadmissible(format!("edge ({a}, {b}) has d_sigma = 0")));
                }
                let mid = pa.midpoint(pb);
                let idx = edges.len();
                edges.push(InternalEdge {
                    cells: (k, l),
                    vertices: (*a, *b),
                    measure,
                    dist,
                    dist_k: xk.dist(mid),
                    dist_l: xl.dist(mid),
                    normal: (xl - xk) * (1.0 / dist),
                });
                adjacency[k].push(EdgeRef { edge: idx, is_k: true });
                adjacency[l].push(EdgeRef { edge: idx, is_k: false });
            }
            _ => unreachable!("conformity is checked by RawMesh::new"),
        }
    }

    let size = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
    let area = cells.iter().map(|c| c.measure).sum();
    Ok(AdmissibleMesh {
        vertices: verts.clone(),
        cells,
        edges,
        boundary,
        adjacency,
        cell_of_triangle,
        size,
        area,
    })
}

/// Result of [`validate_admissibility`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// `|(x_L - x_K)·t_σ| / d_σ` per internal edge.
    pub orthogonality_defects: Vec<f64>,
    /// Internal edges whose defect exceeds the tolerance.
    pub flagged_edges: Vec<usize>,
    pub nonpositive_cells: Vec<usize>,
    pub nonpositive_edges: Vec<usize>,
    /// Edges where `d_{K,σ} + d_{L,σ}` differs from `d_σ`, i.e. a center is
    /// on the wrong side of the edge.
    pub distance_mismatches: Vec<usize>,
    pub tol: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.flagged_edges.is_empty()
            && self.nonpositive_cells.is_empty()
            && self.nonpositive_edges.is_empty()
            && self.distance_mismatches.is_empty()
    }

    pub fn max_defect(&self) -> f64 {
        self.orthogonality_defects.iter().copied().fold(0.0, f64::max)
    }
}

pub fn validate_admissibility(mesh: &AdmissibleMesh, tol: f64) -> ValidationReport {
    let mut report = ValidationReport {
        orthogonality_defects: Vec::with_capacity(mesh.num_edges()),
        flagged_edges: Vec::new(),
        nonpositive_cells: Vec::new(),
        nonpositive_edges: Vec::new(),
        distance_mismatches: Vec::new(),
        tol,
    };
    for (k, c) in mesh.cells.iter().enumerate() {
        if !(c.measure > 0.0) {
            report.nonpositive_cells.push(k);
        }
    }
    for (i, e) in mesh.edges.iter().enumerate() {
        let (pa, pb) = (mesh.vertices[e.vertices.0], mesh.vertices[e.vertices.1]);
        let (xk, xl) = (mesh.cells[e.cells.0].center, mesh.cells[e.cells.1].center);
        let len = pa.dist(pb);
        let dist = xk.dist(xl);
        if !(len > 0.0 && dist > 0.0) {
            report.nonpositive_edges.push(i);
            report.orthogonality_defects.push(f64::INFINITY);
            report.flagged_edges.push(i);
            continue;
        }
        let tangent = (pb - pa) * (1.0 / len);
        let defect = (xl - xk).dot(tangent).abs() / dist;
        report.orthogonality_defects.push(defect);
        if defect > tol {
            report.flagged_edges.push(i);
        }
        let mid = pa.midpoint(pb);
        if (xk.dist(mid) + xl.dist(mid) - dist).abs() > tol.max(ADMISSIBILITY_TOL) * dist {
            report.distance_mismatches.push(i);
        }
    }
    report
}
