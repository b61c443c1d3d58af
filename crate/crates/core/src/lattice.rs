//! Toroidal square lattice, per-cell connectivity windows, and random movies.
//!
//! Cells are indexed row-major, `i = y * L + x`. The connectivity window of a
//! cell is the `m x m` square centred on it (wrapping on the torus), minus the
//! cell itself, enumerated row-major over the offsets `(dy, dx)`.

use rand::seq::index;
use rand::Rng;

use crate::error::{AstmError, Result};
use crate::rng;

/// Bipolar pixel, always `-1` or `+1`.
pub type Pixel = i8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeConfig {
    side: usize,
    window: usize,
}

impl LatticeConfig {
    /// `window` must be odd with `3 <= window <= side`; `window == side` is
    /// allowed only for odd `side`.
    pub fn new(side: usize, window: usize) -> Result<Self> {
        if window % 2 == 0 {
            return Err(AstmError::InvalidConfig(format!(
                "window {window} must be odd"
            )));
        }
        if window < 3 {
            return Err(AstmError::InvalidConfig(format!(
                "window {window} must be at least 3"
            )));
        }
        if window > side {
            return Err(AstmError::InvalidConfig(format!(
                "window {window} exceeds lattice side {side}"
            )));
        }
        Ok(LatticeConfig { side, window })
    }

    /// Lattice edge `L`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Connectivity-window edge `m`.
    pub fn window(&self) -> usize {
        self.window
    }

    /// `N = L^2`
    pub fn cell_count(&self) -> usize {
        self.side * self.side
    }

    /// `M = m^2 - 1`
    pub fn connectivity(&self) -> usize {
        self.window * self.window - 1
    }
}

/// Ordered in-window neighbours of every cell, stored as one flat `N x M`
/// index table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectivityMap {
    cells: usize,
    arity: usize,
    neighbors: Vec<u32>,
}

impl ConnectivityMap {
    pub fn build(cfg: &LatticeConfig) -> Self {
        let l = cfg.side() as isize;
        let half = (cfg.window() / 2) as isize;
        let cells = cfg.cell_count();
        let arity = cfg.connectivity();
        let mut neighbors = Vec::with_capacity(cells * arity);
        for y in 0..l {
            for x in 0..l {
                for dy in -half..=half {
                    for dx in -half..=half {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let ny = (y + dy).rem_euclid(l);
                        let nx = (x + dx).rem_euclid(l);
                        neighbors.push((ny * l + nx) as u32);
                    }
                }
            }
        }
        ConnectivityMap {
            cells,
            arity,
            neighbors,
        }
    }

    /// Arbitrary neighbour lists, e.g. for relabelled or hand-built graphs.
    /// Lists must share one length and index valid cells; symmetry is not
    /// enforced (see [`ConnectivityMap::is_symmetric`]).
    pub fn from_lists(lists: &[Vec<usize>]) -> Result<Self> {
        let cells = lists.len();
        let arity = lists.first().map_or(0, Vec::len);
        let mut neighbors = Vec::with_capacity(cells * arity);
        for (i, list) in lists.iter().enumerate() {
            if list.len() != arity {
                return Err(AstmError::DimensionMismatch {
                    what: "neighbours per cell",
                    expected: arity,
                    got: list.len(),
                });
            }
            for &j in list {
                if j >= cells {
                    return Err(AstmError::InvalidConfig(format!(
                        "cell {i} lists out-of-range neighbour {j}"
                    )));
                }
                neighbors.push(j as u32);
            }
        }
        Ok(ConnectivityMap {
            cells,
            arity,
            neighbors,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    /// Neighbours per cell, `M`.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn neighbors(&self, cell: usize) -> &[u32] {
        &self.neighbors[cell * self.arity..(cell + 1) * self.arity]
    }

    /// `j in neighbors(i) <=> i in neighbors(j)` for every pair.
    pub fn is_symmetric(&self) -> bool {
        let mut sorted: Vec<Vec<u32>> = (0..self.cells)
            .map(|i| {
                let mut v = self.neighbors(i).to_vec();
                v.sort_unstable();
                v
            })
            .collect();
        for v in sorted.iter_mut() {
            v.dedup();
        }
        (0..self.cells).all(|i| {
            sorted[i]
                .iter()
                .all(|&j| sorted[j as usize].binary_search(&(i as u32)).is_ok())
        })
    }
}

/// An ordered sequence of `Q` bipolar frames of `N` pixels each.
#[derive(Clone, Debug, PartialEq)]
pub struct Movie {
    pixels: usize,
    frames: Vec<Pixel>,
    duty: f64,
}

impl Movie {
    /// `frames` is the row-major `Q x N` pixel table.
    pub fn new(pixels: usize, frames: Vec<Pixel>, duty: f64) -> Result<Self> {
        if pixels == 0 || frames.is_empty() || frames.len() % pixels != 0 {
            return Err(AstmError::DimensionMismatch {
                what: "pixels (whole frames, Q >= 1)",
                expected: pixels.max(1),
                got: frames.len(),
            });
        }
        if let Some(bad) = frames.iter().find(|&&s| s != 1 && s != -1) {
            return Err(AstmError::param("pixel", format!("{bad} is not bipolar")));
        }
        Ok(Movie {
            pixels,
            frames,
            duty,
        })
    }

    pub fn from_frames(frames: &[Vec<Pixel>], duty: f64) -> Result<Self> {
        let pixels = frames.first().map_or(0, Vec::len);
        if let Some(f) = frames.iter().find(|f| f.len() != pixels) {
            return Err(AstmError::DimensionMismatch {
                what: "pixels per frame",
                expected: pixels,
                got: f.len(),
            });
        }
        Movie::new(pixels, frames.concat(), duty)
    }

    /// `N`
    pub fn pixel_count(&self) -> usize {
        self.pixels
    }

    /// `Q`
    pub fn frame_count(&self) -> usize {
        self.frames.len() / self.pixels
    }

    pub fn duty(&self) -> f64 {
        self.duty
    }

    /// Frame `q`, taken cyclically (`q` may exceed `Q - 1`).
    pub fn frame(&self, q: usize) -> &[Pixel] {
        let q = q % self.frame_count();
        &self.frames[q * self.pixels..(q + 1) * self.pixels]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Pixel]> {
        self.frames.chunks_exact(self.pixels)
    }

    /// Text form: header `ASTM1 <L> <m> <Q> <d>`, then one line of `0`/`1`
    /// characters per frame.
    pub fn to_text(&self, cfg: &LatticeConfig) -> Result<String> {
        if cfg.cell_count() != self.pixels {
            return Err(AstmError::DimensionMismatch {
                what: "lattice cells",
                expected: cfg.cell_count(),
                got: self.pixels,
            });
        }
        let mut out = format!(
            "ASTM1 {} {} {} {}\n",
            cfg.side(),
            cfg.window(),
            self.frame_count(),
            self.duty
        );
        out.reserve(self.frames.len() + self.frame_count());
        for frame in self.frames() {
            out.extend(frame.iter().map(|&s| if s > 0 { '1' } else { '0' }));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse_text(text: &str) -> Result<(LatticeConfig, Movie)> {
        const KIND: &str = "movie";
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| AstmError::format(KIND, 1, "empty file"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 5 || fields[0] != "ASTM1" {
            return Err(AstmError::format(
                KIND,
                1,
                "header must be `ASTM1 <L> <m> <Q> <d>`",
            ));
        }
        let num = |s: &str, name: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| AstmError::format(KIND, 1, format!("bad {name} `{s}`")))
        };
        let side = num(fields[1], "L")?;
        let window = num(fields[2], "m")?;
        let frames = num(fields[3], "Q")?;
        let duty: f64 = fields[4]
            .parse()
            .map_err(|_| AstmError::format(KIND, 1, format!("bad d `{}`", fields[4])))?;
        if frames == 0 {
            return Err(AstmError::format(KIND, 1, "Q must be at least 1"));
        }
        let cfg = LatticeConfig::new(side, window)?;
        let n = cfg.cell_count();
        let mut pixels = Vec::with_capacity(n * frames);
        for q in 0..frames {
            let line_no = q + 2;
            let line = lines
                .next()
                .ok_or_else(|| AstmError::format(KIND, line_no, "missing frame line"))?;
            if line.len() != n {
                return Err(AstmError::format(
                    KIND,
                    line_no,
                    format!("expected {n} pixels, found {}", line.len()),
                ));
            }
            for c in line.bytes() {
                pixels.push(match c {
                    b'1' => 1,
                    b'0' => -1,
                    other => {
                        return Err(AstmError::format(
                            KIND,
                            line_no,
                            format!("invalid pixel character {:?}", other as char),
                        ))
                    }
                });
            }
        }
        if let Some((extra, _)) = lines.enumerate().find(|(_, l)| !l.is_empty()) {
            return Err(AstmError::format(
                KIND,
                frames + 2 + extra,
                "unexpected trailing content",
            ));
        }
        Ok((cfg, Movie::new(n, pixels, duty)?))
    }
}

/// Movie of `frames` i.i.d. frames; each pixel is `+1` with probability `duty`.
pub fn random_movie(pixels: usize, frames: usize, duty: f64, seed: u64) -> Result<Movie> {
    if !(duty > 0.0 && duty < 1.0) {
        return Err(AstmError::param("duty", format!("{duty} not in (0, 1)")));
    }
    if frames == 0 || pixels == 0 {
        return Err(AstmError::param("frames", "need Q >= 1 and N >= 1"));
    }
    let mut rng = rng::seeded(seed);
    let data = (0..pixels * frames)
        .map(|_| if rng.random_bool(duty) { 1 } else { -1 })
        .collect();
    Movie::new(pixels, data, duty)
}

/// Number of pixels [`flip_pixels`] negates for a frame of `pixels` cells.
pub fn flip_count(pixels: usize, fraction: f64) -> usize {
    ((fraction * pixels as f64).round() as usize).min(pixels)
}

/// Negates exactly `round(f * N)` distinct, uniformly chosen pixels.
pub fn flip_pixels(frame: &[Pixel], fraction: f64, seed: u64) -> Result<Vec<Pixel>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(AstmError::param(
            "flip fraction",
            format!("{fraction} not in [0, 1]"),
        ));
    }
    let mut out = frame.to_vec();
    let k = flip_count(frame.len(), fraction);
    if k == 0 {
        return Ok(out);
    }
    let mut rng = rng::seeded(seed);
    for i in index::sample(&mut rng, frame.len(), k) {
        out[i] = -out[i];
    }
    Ok(out)
}

pub fn hamming(a: &[Pixel], b: &[Pixel]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_windows() {
        assert!(LatticeConfig::new(9, 4).is_err());
        assert!(LatticeConfig::new(9, 1).is_err());
        assert!(LatticeConfig::new(5, 7).is_err());
        assert!(LatticeConfig::new(5, 5).is_ok());
        assert!(LatticeConfig::new(3, 3).is_ok());
    }

    #[test]
    fn side_101_window_21_size() {
        let cfg = LatticeConfig::new(101, 21).unwrap();
        assert_eq!(cfg.cell_count(), 10_201);
        assert_eq!(cfg.connectivity(), 440);
    }

    #[test]
    fn full_window_covers_every_other_cell() {
        let cfg = LatticeConfig::new(3, 3).unwrap();
        let conn = ConnectivityMap::build(&cfg);
        for i in 0..9 {
            let mut n: Vec<u32> = conn.neighbors(i).to_vec();
            n.sort_unstable();
            let expected: Vec<u32> = (0..9).filter(|&j| j != i as u32).collect();
            assert_eq!(n, expected);
        }
    }

    #[test]
    fn corner_cell_order_on_five_by_five() {
        // (y, x) pairs: (4,4) (4,0) (4,1) (0,4) (0,1) (1,4) (1,0) (1,1)
        let cfg = LatticeConfig::new(5, 3).unwrap();
        let conn = ConnectivityMap::build(&cfg);
        assert_eq!(conn.neighbors(0), &[24, 20, 21, 4, 1, 9, 5, 6]);
    }

    #[test]
    fn symmetry_exhaustive_small_lattices() {
        for side in 3..=9 {
            for window in (3..=side).step_by(2) {
                let cfg = LatticeConfig::new(side, window).unwrap();
                let conn = ConnectivityMap::build(&cfg);
                assert!(conn.is_symmetric(), "L={side} m={window}");
                let total: usize = (0..conn.cell_count())
                    .map(|i| conn.neighbors(i).len())
                    .sum();
                assert_eq!(total, cfg.cell_count() * cfg.connectivity());
                for i in 0..conn.cell_count() {
                    let mut n = conn.neighbors(i).to_vec();
                    assert!(!n.contains(&(i as u32)));
                    n.sort_unstable();
                    n.dedup();
                    assert_eq!(
                        n.len(),
                        cfg.connectivity(),
                        "duplicates L={side} m={window}"
                    );
                }
            }
        }
    }

    #[test]
    fn asymmetric_lists_are_detected() {
        let lists = vec![vec![1], vec![2], vec![0]];
        let conn = ConnectivityMap::from_lists(&lists).unwrap();
        assert!(!conn.is_symmetric());
    }

    #[test]
    fn duty_fraction_within_three_sigma() {
        let m = random_movie(1000, 1000, 0.3, 11).unwrap();
        let plus = m.frames().flatten().filter(|&&s| s == 1).count() as f64;
        let frac = plus / 1e6;
        assert!((0.2986..=0.3014).contains(&frac), "{frac}");

        let m = random_movie(500, 200, 0.5, 12).unwrap();
        let plus = m.frames().flatten().filter(|&&s| s == 1).count() as f64;
        let nq = 1e5;
        let bound = 3.0 * (0.25f64 / nq).sqrt();
        assert!((plus / nq - 0.5).abs() <= bound);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_movie(64, 5, 0.5, 99).unwrap();
        let b = random_movie(64, 5, 0.5, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_movie(64, 5, 0.5, 100).unwrap());
    }

    #[test]
    fn flip_extremes() {
        let m = random_movie(50, 1, 0.5, 1).unwrap();
        let f = m.frame(0);
        assert_eq!(flip_pixels(f, 0.0, 3).unwrap(), f);
        let neg: Vec<Pixel> = f.iter().map(|s| -s).collect();
        assert_eq!(flip_pixels(f, 1.0, 3).unwrap(), neg);
        assert!(flip_pixels(f, 1.5, 3).is_err());
    }

    #[test]
    fn five_hundred_flips_at_side_101() {
        let f: f64 = 500.0 / 10_201.0;
        assert!((f - 0.049).abs() < 5e-4);
        assert_eq!(flip_count(10_201, f), 500);
    }

    #[test]
    fn movie_text_round_trip_and_rejections() {
        let cfg = LatticeConfig::new(3, 3).unwrap();
        let m = random_movie(9, 2, 0.5, 5).unwrap();
        let text = m.to_text(&cfg).unwrap();
        assert!(text.starts_with("ASTM1 3 3 2 0.5\n"));
        let (cfg2, m2) = Movie::parse_text(&text).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(m2, m);
        assert_eq!(m2.to_text(&cfg2).unwrap(), text);

        assert!(Movie::parse_text("ASTM1 3 3 1 0.5\n10101010\n").is_err());
        assert!(Movie::parse_text("ASTM1 3 3 1 0.5\n1010101x1\n").is_err());
        assert!(Movie::parse_text("ASTM1 3 3 2 0.5\n101010101\n").is_err());
        assert!(Movie::parse_text("ASTM2 3 3 1 0.5\n101010101\n").is_err());
        assert!(Movie::parse_text("ASTM1 4 3 1 0.5\n1010101011111111\n").is_ok());
        assert!(Movie::parse_text("ASTM1 4 4 1 0.5\n1010101011111111\n").is_err());
    }

    proptest! {
        #[test]
        fn flip_changes_exact_count(n in 1usize..300, f in 0.0f64..=1.0, seed in any::<u64>()) {
            let m = random_movie(n, 1, 0.5, seed).unwrap();
            let out = flip_pixels(m.frame(0), f, seed ^ 1).unwrap();
            prop_assert_eq!(hamming(m.frame(0), &out), flip_count(n, f));
            prop_assert_eq!(out, flip_pixels(m.frame(0), f, seed ^ 1).unwrap());
        }
    }
}
