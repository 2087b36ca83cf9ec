//! Sampling of the region {q : T(q|p) + T(r|q) ≤ T(r|p)} on the 2-simplex.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::divergence::l_divergence;
use crate::error::{check_dim, Error, Result};
use crate::generator::{ensure_dim, Generator};
use crate::simplex::SimplexPoint;

/// Points with |gap| at or below this are classified as boundary points.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// T(q|p) + T(r|q) − T(r|p).
pub fn region_gap<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    q: &SimplexPoint,
    r: &SimplexPoint,
) -> Result<f64> {
    let t = |a: &SimplexPoint, b: &SimplexPoint| l_divergence(gen, a, b).map(|d| d.value);
    Ok(t(q, p)? + t(r, q)? - t(r, p)?)
}

/// Whether q lies in the region, for any number of assets.
pub fn region_contains<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    q: &SimplexPoint,
    r: &SimplexPoint,
) -> Result<bool> {
    check_dim(p.dim(), q.dim())?;
    check_dim(p.dim(), r.dim())?;
    Ok(region_gap(gen, p, q, r)? <= 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionPoint {
    pub q: SimplexPoint,
    pub gap: f64,
    pub in_region: bool,
    pub boundary: bool,
}

impl RegionPoint {
    fn new(q: SimplexPoint, gap: f64) -> Self {
        RegionPoint { q, gap, in_region: gap <= 0.0, boundary: gap.abs() <= BOUNDARY_TOL }
    }
}

/// Lattice classification together with the zero level set as line segments.
#[derive(Clone, Debug)]
pub struct RegionSample {
    pub p: SimplexPoint,
    pub r: SimplexPoint,
    pub resolution: usize,
    /// Interior lattice points followed by p and r.
    pub points: Vec<RegionPoint>,
    /// Segments of the boundary gap = 0, one per crossed lattice triangle.
    pub boundary: Vec<(DVector<f64>, DVector<f64>)>,
}

/// Lattice index of (i, j) among points with i, j, k ≥ 1 and i + j + k = R.
fn lattice_index(res: usize, i: usize, j: usize) -> Option<usize> {
    if i == 0 || j == 0 || i + j >= res {
        return None;
    }
    // Rows i = 1.. hold R − i − 1 points each.
    let before: usize = (1..i).map(|a| res - a - 1).sum();
    Some(before + j - 1)
}

/// Classifies the interior lattice {(i, j, k)/R : i, j, k ≥ 1} and traces the
/// boundary by marching triangles with bisection along crossed edges.
pub fn region_sample<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    r: &SimplexPoint,
    resolution: usize,
) -> Result<RegionSample> {
    check_dim(3, p.dim())?;
    check_dim(3, r.dim())?;
    ensure_dim(gen, 3)?;
    if resolution < 3 {
        return Err(Error::InvalidParameter("resolution must be at least 3".into()));
    }
    let res = resolution;
    let coords: Vec<(usize, usize)> = (1..res)
        .flat_map(|i| (1..res - i).map(move |j| (i, j)))
        .collect();
    let lattice: Vec<RegionPoint> = coords
        .par_iter()
        .map(|&(i, j)| {
            let k = res - i - j;
            let q = SimplexPoint::new(vec![i as f64 / res as f64, j as f64 / res as f64, k as f64 / res as f64])?;
            let gap = region_gap(gen, p, &q, r)?;
            Ok(RegionPoint::new(q, gap))
        })
        .collect::<Result<_>>()?;

    let mut triangles = Vec::new();
    for i in 1..res {
        for j in 1..res {
            let up = [(i, j), (i + 1, j), (i, j + 1)];
            let down = [(i + 1, j), (i, j + 1), (i + 1, j + 1)];
            for tri in [up, down] {
                let idx: Option<Vec<usize>> = tri.iter().map(|&(a, b)| lattice_index(res, a, b)).collect();
                if let Some(idx) = idx {
                    triangles.push([idx[0], idx[1], idx[2]]);
                }
            }
        }
    }
    let boundary: Vec<(DVector<f64>, DVector<f64>)> = triangles
        .par_iter()
        .map(|tri| -> Result<Option<(DVector<f64>, DVector<f64>)>> {
            let mut hits = Vec::new();
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let (pa, pb) = (&lattice[a], &lattice[b]);
                if pa.in_region != pb.in_region {
                    hits.push(edge_zero(gen, p, r, pa, pb)?);
                }
            }
            Ok(if hits.len() == 2 {
                let b = hits.pop().unwrap();
                Some((hits.pop().unwrap(), b))
            } else {
                None
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut points = lattice;
    for x in [p, r] {
        let gap = region_gap(gen, p, x, r)?;
        points.push(RegionPoint::new(x.clone(), gap));
    }
    Ok(RegionSample { p: p.clone(), r: r.clone(), resolution, points, boundary })
}

/// Bisection for gap = 0 on the segment between two lattice points of
/// opposite classification.
fn edge_zero<G: Generator + ?Sized>(
    gen: &G,
    p: &SimplexPoint,
    r: &SimplexPoint,
    a: &RegionPoint,
    b: &RegionPoint,
) -> Result<DVector<f64>> {
    let (inside, outside) = if a.in_region { (a, b) } else { (b, a) };
    let (mut lo, mut hi) = (inside.q.vector().clone(), outside.q.vector().clone());
    for _ in 0..60 {
        let mid = (&lo + &hi) * 0.5;
        let gap = region_gap(gen, p, &SimplexPoint::new(mid.as_slice().to_vec())?, r)?;
        if gap.abs() <= BOUNDARY_TOL {
            return Ok(mid);
        }
        if gap <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (&hi - &lo).amax() < 1e-15 {
            break;
        }
    }
    Ok((lo + hi) * 0.5)
}

impl RegionSample {
    pub fn in_region_count(&self) -> usize {
        self.points.iter().filter(|x| x.in_region).count()
    }

    /// CSV with columns q1,q2,q3,gap,in_region.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q1", "q2", "q3", "gap", "in_region"])?;
        for x in &self.points {
            w.write_record([
                x.q[0].to_string(),
                x.q[1].to_string(),
                x.q[2].to_string(),
                x.gap.to_string(),
                (x.in_region as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// SVG drawing of the simplex with the region shaded, the boundary traced
    /// and p, r marked.
    pub fn write_svg<W: Write>(&self, mut out: W) -> Result<()> {
        const SIZE: f64 = 600.0;
        const PAD: f64 = 30.0;
        let h = SIZE * 3f64.sqrt() / 2.0;
        // Vertex e1 bottom-left, e2 bottom-right, e3 top.
        let xy = |q: &[f64]| -> (f64, f64) {
            let x = PAD + SIZE * (q[1] + 0.5 * q[2]);
            let y = PAD + h * (1.0 - q[2]);
            (x, y)
        };
        let width = SIZE + 2.0 * PAD;
        let height = h + 2.0 * PAD;
        writeln!(
            out,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.2} {height:.2}">"#
        )?;
        let (a, b, c) = (xy(&[1.0, 0.0, 0.0]), xy(&[0.0, 1.0, 0.0]), xy(&[0.0, 0.0, 1.0]));
        writeln!(
            out,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="white" stroke="black" stroke-width="1.5"/>"#,
            a.0, a.1, b.0, b.1, c.0, c.1
        )?;
        let cell = SIZE / self.resolution as f64;
        writeln!(out, r##"<g fill="#4a7fb5" fill-opacity="0.55" stroke="none">"##)?;
        let m = self.points.len() - 2;
        for x in self.points[..m].iter().filter(|x| x.in_region) {
            let (px, py) = xy(x.q.as_slice());
            writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="{:.2}"/>"#, 0.6 * cell)?;
        }
        writeln!(out, "</g>")?;
        writeln!(out, r##"<g stroke="#1b3a5c" stroke-width="1.2" fill="none">"##)?;
        for (s, e) in &self.boundary {
            let (x0, y0) = xy(s.as_slice());
            let (x1, y1) = xy(e.as_slice());
            writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#)?;
        }
        writeln!(out, "</g>")?;
        for (label, pt, colour) in [("p", &self.p, "#c0392b"), ("r", &self.r, "#27ae60")] {
            let (x, y) = xy(pt.as_slice());
            writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{colour}"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14">{label}</text>"#,
                x + 6.0,
                y - 6.0
            )?;
        }
        writeln!(out, "</svg>")?;
        Ok(())
    }
}
