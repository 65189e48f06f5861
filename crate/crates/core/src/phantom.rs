//! Deterministic test phantoms.
//!
//! Binary phantoms are fixed 32x32 masks downsampled by local means. The
//! Shepp-Logan phantom is rasterized from the ten-ellipse table at 256x256.
//! Digit-style images imitate the 8x8 4-bit handwritten digits dataset.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{downsample_local_mean, quantize_to_bits, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    SheppLogan,
    Foam,
    Tree,
    Snowflake,
    Molecule,
}

impl PhantomKind {
    pub const BINARY: [PhantomKind; 4] = [
        PhantomKind::Foam,
        PhantomKind::Tree,
        PhantomKind::Snowflake,
        PhantomKind::Molecule,
    ];

    pub fn bit_depth(self) -> u32 {
        match self {
            PhantomKind::SheppLogan => 4,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::SheppLogan => "shepp_logan",
            PhantomKind::Foam => "foam",
            PhantomKind::Tree => "tree",
            PhantomKind::Snowflake => "snowflake",
            PhantomKind::Molecule => "molecule",
        }
    }

    /// Native resolution the phantom is defined at before downsampling.
    pub fn base_side(self) -> usize {
        match self {
            PhantomKind::SheppLogan => SHEPP_LOGAN_SIDE,
            _ => MASK_SIDE,
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "shepp_logan" | "shepplogan" => Ok(PhantomKind::SheppLogan),
            "foam" => Ok(PhantomKind::Foam),
            "tree" => Ok(PhantomKind::Tree),
            "snowflake" => Ok(PhantomKind::Snowflake),
            "molecule" => Ok(PhantomKind::Molecule),
            _ => Err(Error::InvalidValue(format!("unknown phantom {s:?}"))),
        }
    }
}

/// Generate phantom `kind` at side `n`. `n` must divide the phantom's base
/// resolution (32 for binary masks, 256 for Shepp-Logan).
pub fn generate_phantom(kind: PhantomKind, n: usize) -> Result<Image> {
    let base = kind.base_side();
    if n == 0 || base % n != 0 {
        return Err(Error::InvalidSize(format!(
            "{kind} phantom side must divide {base}, got {n}"
        )));
    }
    let full = match kind {
        PhantomKind::SheppLogan => shepp_logan_full()?,
        PhantomKind::Foam => mask_image(&FOAM),
        PhantomKind::Tree => mask_image(&TREE),
        PhantomKind::Snowflake => mask_image(&SNOWFLAKE),
        PhantomKind::Molecule => mask_image(&MOLECULE),
    };
    downsample_local_mean(&full, base / n)
}

pub const SHEPP_LOGAN_SIDE: usize = 256;

/// Modified (high-contrast) Shepp-Logan table:
/// intensity, semi-axis a, semi-axis b, centre x, centre y, rotation (deg).
pub const SHEPP_LOGAN_ELLIPSES: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Real-valued Shepp-Logan at 256x256 on `[-1, 1]^2`, y pointing up.
fn shepp_logan_values() -> Vec<f64> {
    let n = SHEPP_LOGAN_SIDE;
    let mut out = vec![0.0; n * n];
    for row in 0..n {
        let y = 1.0 - (row as f64 + 0.5) * 2.0 / n as f64;
        for col in 0..n {
            let x = (col as f64 + 0.5) * 2.0 / n as f64 - 1.0;
            out[row * n + col] = SHEPP_LOGAN_ELLIPSES
                .iter()
                .filter(|e| inside_ellipse(e, x, y))
                .map(|e| e[0])
                .sum();
        }
    }
    out
}

fn inside_ellipse(e: &[f64; 6], x: f64, y: f64) -> bool {
    let (s, c) = e[5].to_radians().sin_cos();
    let dx = x - e[3];
    let dy = y - e[4];
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    (u / e[1]).powi(2) + (v / e[2]).powi(2) <= 1.0
}

fn shepp_logan_full() -> Result<Image> {
    let values = shepp_logan_values();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = values.iter().map(|v| (v - lo) / (hi - lo) * 15.0).collect();
    Image::new(SHEPP_LOGAN_SIDE, 4, quantize_to_bits(&scaled, 4)?)
}

/// 3x5 bitmap glyphs for the digits 0-9, top row first.
const DIGIT_GLYPHS: [[&str; 5]; 10] = [
    ["###", "#.#", "#.#", "#.#", "###"],
    [".#.", "##.", ".#.", ".#.", "###"],
    ["###", "..#", "###", "#..", "###"],
    ["###", "..#", ".##", "..#", "###"],
    ["#.#", "#.#", "###", "..#", "..#"],
    ["###", "#..", "###", "..#", "###"],
    ["###", "#..", "###", "#.#", "###"],
    ["###", "..#", ".#.", ".#.", ".#."],
    ["###", "#.#", "###", "#.#", "###"],
    ["###", "#.#", "###", "..#", "###"],
];

const DIGIT_SUPERSAMPLE: usize = 8;

/// 8x8 4-bit digit-style image of `digit` (taken mod 10), with a seeded
/// sub-pixel shift and stroke intensity so that different seeds give
/// different grey levels.
pub fn synthetic_digit(digit: usize, seed: u64) -> Result<Image> {
    let glyph = &DIGIT_GLYPHS[digit % 10];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ss = DIGIT_SUPERSAMPLE;
    let fine = 8 * ss;
    let shift_x = rng.gen_range(-4i64..=4) as f64;
    let shift_y = rng.gen_range(-4i64..=4) as f64;
    let intensity = rng.gen_range(12u32..=15);
    // glyph box in fine pixels: 6 wide, 7 tall, centred
    let x0 = 1.0 * ss as f64 + shift_x;
    let y0 = 0.5 * ss as f64 + shift_y;
    let cell_w = 2.0 * ss as f64;
    let cell_h = 1.4 * ss as f64;
    let mut px = vec![0u32; fine * fine];
    for r in 0..fine {
        let fy = r as f64 + 0.5;
        for c in 0..fine {
            let fx = c as f64 + 0.5;
            let gc = ((fx - x0) / cell_w).floor();
            let gr = ((fy - y0) / cell_h).floor();
            if (0.0..3.0).contains(&gc) && (0.0..5.0).contains(&gr) {
                let on = glyph[gr as usize].as_bytes()[gc as usize] == b'#';
                if on {
                    px[r * fine + c] = intensity;
                }
            }
        }
    }
    downsample_local_mean(&Image::new(fine, 4, px)?, ss)
}

const MASK_SIDE: usize = 32;

fn mask_image(rows: &[&str; MASK_SIDE]) -> Image {
    let pixels = rows
        .iter()
        .flat_map(|r| r.bytes().map(|b| u32::from(b == b'#')))
        .collect();
    Image::new(MASK_SIDE, 1, pixels).expect("mask constants are 32x32")
}

// Porous disc with circular holes of mixed size.
const FOAM: [&str; 32] = [
    "................................",
    "...............##...............",
    "...........##########...........",
    ".........##############.........",
    ".......##################.......",
    "......####################......",
    ".....######################.....",
    "....####....######....######....",
    "....###......#####....######....",
    "...####......#####....#######...",
    "...####......#####....#######...",
    "..#####......#################..",
    "..######....##################..",
    "..#############..#####..######..",
    "..#####..#####....##......####..",
    ".######..#####....##......#####.",
    ".##############..##........####.",
    "..#########..######........###..",
    "..########....######......####..",
    "..#######......###........####..",
    "..#######......###..##..######..",
    "...##..###....###############...",
    "...##..####..################...",
    "....###########....#####..##....",
    "....###########....#####..##....",
    ".....##########....########.....",
    "......#########....#######......",
    ".......##################.......",
    ".........##############.........",
    "...........##########...........",
    "...............##...............",
    "................................",
];
// Branching mask: trunk with four levels of forks.
const TREE: [&str; 32] = [
    "................................",
    "................................",
    "................................",
    "...........###.########.........",
    "........#################.......",
    "........####################....",
    ".......#####################....",
    "....#################..#######..",
    "...##################.########..",
    "...#####.#####..#####.########..",
    "...######.####...##############.",
    "..############...##############.",
    "..############...#########..###.",
    "..############...#######........",
    "..#####################.........",
    "..####..#############...........",
    "..........###########...........",
    "...........#########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
    "............########............",
];
// Six-fold symmetric arms with side branches.
const SNOWFLAKE: [&str; 32] = [
    "................................",
    "................................",
    "................................",
    "........##............##........",
    "........##.##......##.##........",
    ".........###........###.........",
    ".......#####...##...#####.......",
    "........####..####..####........",
    "...........##.#..#.##...........",
    "...........####..####...........",
    "........######....######........",
    ".......#######....#######.......",
    ".......##....##..##....##.......",
    "...##...#.....####.....#...##...",
    "....#...##....####....##...#....",
    ".##############################.",
    ".##############################.",
    "....#...##....####....##...#....",
    "...##...#.....####.....#...##...",
    ".......##....##..##....##.......",
    ".......#######....#######.......",
    "........######....######........",
    "...........####..####...........",
    "...........##.#..#.##...........",
    "........####..####..####........",
    ".......#####...##...#####.......",
    ".........###........###.........",
    "........##.##......##.##........",
    "........##............##........",
    "................................",
    "................................",
    "................................",
];
// Ring of six nodes with three outer substituents.
const MOLECULE: [&str; 32] = [
    ".............######.............",
    ".............######.............",
    ".............######.............",
    ".............######.............",
    ".............######.............",
    ".............######.............",
    "...........##########...........",
    ".........##############.........",
    ".......##################.......",
    ".....######################.....",
    ".....######################.....",
    ".....#######........#######.....",
    ".....#######........#######.....",
    ".....#######.######.#######.....",
    ".....#######.######.#######.....",
    ".....#####...######...#####.....",
    ".....#####...######...#####.....",
    ".....#######.######.#######.....",
    ".....#######.######.#######.....",
    ".....#######........#######.....",
    "..##########........##########..",
    ".##############################.",
    ".##############################.",
    ".##############################.",
    "..#####..##############..#####..",
    "...###.....##########.....###...",
    ".............######.............",
    ".............######.............",
    "................................",
    "................................",
    "................................",
    "................................",
];
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_depths() {
        for kind in PhantomKind::BINARY {
            assert_eq!(generate_phantom(kind, 8).unwrap().bit_depth(), 1);
        }
        assert_eq!(generate_phantom(PhantomKind::SheppLogan, 8).unwrap().bit_depth(), 4);
    }

    #[test]
    fn degenerate_size() {
        let x = generate_phantom(PhantomKind::Foam, 1).unwrap();
        assert_eq!(x.side(), 1);
        assert!(x.pixels()[0] <= 1);
    }

    #[test]
    fn invalid_sizes() {
        assert!(matches!(generate_phantom(PhantomKind::Foam, 0), Err(Error::InvalidSize(_))));
        assert!(generate_phantom(PhantomKind::Tree, 3).is_err());
        assert!(generate_phantom(PhantomKind::Tree, 64).is_err());
        assert!(generate_phantom(PhantomKind::SheppLogan, 64).is_ok());
    }

    #[test]
    fn tree_32_has_both_levels() {
        let x = generate_phantom(PhantomKind::Tree, 32).unwrap();
        assert!(x.pixels().contains(&0));
        assert!(x.pixels().contains(&1));
    }

    #[test]
    fn all_sizes_in_range_and_deterministic() {
        let kinds = [
            PhantomKind::SheppLogan,
            PhantomKind::Foam,
            PhantomKind::Tree,
            PhantomKind::Snowflake,
            PhantomKind::Molecule,
        ];
        for kind in kinds {
            for n in [4, 8, 16, 32] {
                let a = generate_phantom(kind, n).unwrap();
                let b = generate_phantom(kind, n).unwrap();
                assert_eq!(a, b);
                assert!(a.pixels().iter().all(|&v| v <= a.max_value()));
                assert!(a.pixels().iter().any(|&v| v > 0), "{kind} {n}");
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in [PhantomKind::SheppLogan, PhantomKind::Foam, PhantomKind::Molecule] {
            assert_eq!(kind.name().parse::<PhantomKind>().unwrap(), kind);
        }
        assert!("brain".parse::<PhantomKind>().is_err());
    }

    #[test]
    fn synthetic_digits_are_4bit_8x8() {
        for d in 0..10 {
            let x = synthetic_digit(d, d as u64).unwrap();
            assert_eq!((x.side(), x.bit_depth()), (8, 4));
            assert!(x.pixels().iter().any(|&v| v > 0));
            assert!(x.pixels().iter().any(|&v| v == 0));
        }
        assert_eq!(synthetic_digit(3, 9).unwrap(), synthetic_digit(3, 9).unwrap());
    }
}
