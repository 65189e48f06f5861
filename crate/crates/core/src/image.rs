//! Integer images, quantization and file I/O (ASCII PGM, digits CSV).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::round_half_up;

/// Largest supported bit depth; pixel values are stored as `u32`.
pub const MAX_BIT_DEPTH: u32 = 31;

/// Square image of non-negative integer pixels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    side: usize,
    bit_depth: u32,
    pixels: Vec<u32>,
}

impl Image {
    pub fn new(side: usize, bit_depth: u32, pixels: Vec<u32>) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidSize("image side must be positive".into()));
        }
        check_bit_depth(bit_depth)?;
        if pixels.len() != side * side {
            return Err(Error::mismatch("pixel count", side * side, pixels.len()));
        }
        let max = max_value(bit_depth);
        if let Some(v) = pixels.iter().find(|&&v| v > max) {
            return Err(Error::InvalidValue(format!(
                "pixel {v} exceeds {max} for bit depth {bit_depth}"
            )));
        }
        Ok(Self {
            side,
            bit_depth,
            pixels,
        })
    }

    pub fn zeros(side: usize, bit_depth: u32) -> Result<Self> {
        Self::new(side, bit_depth, vec![0; side * side])
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bit_depth(&self) -> u32 {
        self.bit_depth
    }

    pub fn max_value(&self) -> u32 {
        max_value(self.bit_depth)
    }

    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.pixels[row * self.side + col]
    }

    /// Pixels as an `f64` vector, the layout the forward model consumes.
    pub fn to_vector(&self) -> Vec<f64> {
        self.pixels.iter().map(|&v| v as f64).collect()
    }

    pub fn to_float(&self) -> FloatImage {
        FloatImage {
            side: self.side,
            pixels: self.to_vector(),
        }
    }
}

/// Real-valued reconstruction prior to discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub side: usize,
    pub pixels: Vec<f64>,
}

impl FloatImage {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != side * side {
            return Err(Error::mismatch("pixel count", side * side, pixels.len()));
        }
        Ok(Self { side, pixels })
    }

    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            pixels: vec![0.0; side * side],
        }
    }
}

pub fn max_value(bit_depth: u32) -> u32 {
    ((1u64 << bit_depth) - 1) as u32
}

pub(crate) fn check_bit_depth(bit_depth: u32) -> Result<()> {
    if bit_depth == 0 || bit_depth > MAX_BIT_DEPTH {
        return Err(Error::InvalidValue(format!(
            "bit depth must be in 1..={MAX_BIT_DEPTH}, got {bit_depth}"
        )));
    }
    Ok(())
}

/// Block-average downsampling; each output pixel is the half-up rounded mean
/// of a `factor x factor` block.
pub fn downsample_local_mean(img: &Image, factor: usize) -> Result<Image> {
    if factor == 0 || img.side % factor != 0 {
        return Err(Error::InvalidFactor {
            factor,
            side: img.side,
        });
    }
    let out_side = img.side / factor;
    let area = (factor * factor) as f64;
    let max = img.max_value() as f64;
    let mut out = Vec::with_capacity(out_side * out_side);
    for br in 0..out_side {
        for bc in 0..out_side {
            let mut sum = 0u64;
            for r in br * factor..(br + 1) * factor {
                let row = &img.pixels[r * img.side + bc * factor..r * img.side + (bc + 1) * factor];
                sum += row.iter().map(|&v| v as u64).sum::<u64>();
            }
            let v = round_half_up(sum as f64 / area).clamp(0.0, max);
            out.push(v as u32);
        }
    }
    Image::new(out_side, img.bit_depth, out)
}

/// Round each value half-up and clip it into `[0, 2^R - 1]`.
pub fn quantize_to_bits(values: &[f64], bit_depth: u32) -> Result<Vec<u32>> {
    check_bit_depth(bit_depth)?;
    let max = max_value(bit_depth) as f64;
    values
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!("non-finite value {v}")));
            }
            Ok(round_half_up(v).clamp(0.0, max) as u32)
        })
        .collect()
}

/// Serialize as ASCII PGM (`P2`), one image row per line.
pub fn pgm_string(img: &Image) -> String {
    let mut s = String::new();
    let _ = write!(s, "P2\n{} {}\n{}\n", img.side, img.side, img.max_value());
    for row in img.pixels.chunks(img.side) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn save_pgm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pgm_string(img)).map_err(|e| Error::io(path, e))
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&text, path)
}

/// Parse ASCII PGM text. `origin` is only used in error messages.
pub fn parse_pgm(text: &str, origin: &Path) -> Result<Image> {
    let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        content.split_whitespace().map(move |t| (i + 1, t))
    });
    let err = |line: usize, msg: String| Error::parse(origin, line, msg);
    let mut next = |what: &str| {
        tokens
            .next()
            .ok_or_else(|| err(text.lines().count().max(1), format!("unexpected end of file, expected {what}")))
    };

    let (line, magic) = next("magic")?;
    if magic != "P2" {
        return Err(err(line, format!("unsupported magic {magic:?}, only P2 is supported")));
    }
    let mut header_num = |what: &str| -> Result<(usize, u64)> {
        let (line, tok) = next(what)?;
        tok.parse::<u64>()
            .map(|v| (line, v))
            .map_err(|_| err(line, format!("invalid {what} {tok:?}")))
    };
    let (wline, width) = header_num("width")?;
    let (_, height) = header_num("height")?;
    let (mline, maxval) = header_num("maxval")?;
    if width == 0 || width != height {
        return Err(err(wline, format!("image must be square and non-empty, got {width}x{height}")));
    }
    let plus_one = maxval + 1;
    if maxval == 0 || !plus_one.is_power_of_two() || plus_one.trailing_zeros() > MAX_BIT_DEPTH {
        return Err(err(mline, format!("maxval {maxval} is not of the form 2^R - 1")));
    }
    let bit_depth = plus_one.trailing_zeros();
    let side = width as usize;

    let mut pixels = Vec::with_capacity(side * side);
    for _ in 0..side * side {
        let (line, tok) = next("pixel")?;
        let v: u64 = tok
            .parse()
            .map_err(|_| err(line, format!("invalid pixel {tok:?}")))?;
        if v > maxval {
            return Err(err(line, format!("pixel {v} exceeds maxval {maxval}")));
        }
        pixels.push(v as u32);
    }
    if let Some((line, tok)) = tokens.next() {
        return Err(err(line, format!("trailing data {tok:?}")));
    }
    Image::new(side, bit_depth, pixels)
}

/// Bit depth of images read from the digits dataset.
pub const DIGITS_BIT_DEPTH: u32 = 4;
const DIGITS_PIXELS: usize = 64;

/// Load row `row_index` (0-based) of an 8x8 digits CSV as a 4-bit image.
///
/// Rows hold 64 integer cells, optionally followed by a label column which
/// is ignored. Values above 15 are clipped.
pub fn load_digits_csv(path: impl AsRef<Path>, row_index: usize) -> Result<Image> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, 0, format!("{other:?}")),
        })?;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if i != row_index {
            continue;
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if record.len() != DIGITS_PIXELS && record.len() != DIGITS_PIXELS + 1 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 64 or 65 columns, found {}", record.len()),
            ));
        }
        let values = record
            .iter()
            .take(DIGITS_PIXELS)
            .map(|cell| {
                cell.trim()
                    .parse::<i64>()
                    .map(|v| v as f64)
                    .map_err(|_| Error::parse(path, line, format!("non-integer cell {cell:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let pixels = quantize_to_bits(&values, DIGITS_BIT_DEPTH)?;
        return Image::new(8, DIGITS_BIT_DEPTH, pixels);
    }
    Err(Error::InvalidValue(format!(
        "row {row_index} not found in {}",
        path.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn img(side: usize, r: u32, px: &[u32]) -> Image {
        Image::new(side, r, px.to_vec()).unwrap()
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(Image::new(1, 1, vec![2]).is_err());
        assert!(Image::new(2, 4, vec![0; 3]).is_err());
        assert!(Image::new(0, 4, vec![]).is_err());
    }

    #[test]
    fn downsample_examples() {
        let ones = img(4, 1, &[1; 16]);
        assert_eq!(downsample_local_mean(&ones, 2).unwrap(), img(2, 1, &[1; 4]));

        let checker = img(2, 1, &[0, 1, 1, 0]);
        assert_eq!(downsample_local_mean(&checker, 2).unwrap(), img(1, 1, &[1]));

        let mut px = [0u32; 16];
        px[5] = 15;
        let spike = img(4, 4, &px);
        let out = downsample_local_mean(&spike, 2).unwrap();
        assert_eq!(out.pixels(), &[4, 0, 0, 0]);
    }

    #[test]
    fn downsample_rejects_bad_factor() {
        let x = img(4, 1, &[0; 16]);
        assert!(matches!(
            downsample_local_mean(&x, 3),
            Err(Error::InvalidFactor { factor: 3, side: 4 })
        ));
        assert!(downsample_local_mean(&x, 0).is_err());
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_to_bits(&[16.0], 4).unwrap(), vec![15]);
        assert_eq!(quantize_to_bits(&[0.0], 1).unwrap(), vec![0]);
        assert_eq!(quantize_to_bits(&[7.4], 4).unwrap(), vec![7]);
        assert_eq!(quantize_to_bits(&[2.5, -0.5, -3.0], 4).unwrap(), vec![3, 0, 0]);
        assert!(quantize_to_bits(&[f64::NAN], 4).is_err());
        assert!(quantize_to_bits(&[f64::INFINITY], 4).is_err());
    }

    #[test]
    fn minimal_pgm_body() {
        assert_eq!(pgm_string(&img(1, 1, &[0])), "P2\n1 1\n1\n0\n");
    }

    #[test]
    fn pgm_parse_errors_carry_line_numbers() {
        let p = Path::new("mem.pgm");
        let e = parse_pgm("P5\n1 1\n1\n0\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = parse_pgm("P2\n1 1\n6\n0\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_pgm("P2\n2 2\n1\n0 1\n1 2\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 5, .. }), "{e}");
        let e = parse_pgm("P2\n2 1\n1\n0 1\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{e}");
        assert!(parse_pgm("P2\n1 1\n1\n", p).is_err());
        assert!(parse_pgm("P2\n1 1\n1\n0 0\n", p).is_err());
    }

    #[test]
    fn pgm_accepts_comments() {
        let x = parse_pgm("P2\n# comment\n2 2 # inline\n15\n1 2\n3 15\n", Path::new("c")).unwrap();
        assert_eq!(x, img(2, 4, &[1, 2, 3, 15]));
    }

    #[test]
    fn pgm_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let x = img(3, 4, &[0, 1, 2, 3, 4, 5, 6, 7, 15]);
        save_pgm(&x, &path).unwrap();
        assert_eq!(load_pgm(&path).unwrap(), x);
    }

    fn write_csv(rows: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for r in rows {
            writeln!(f, "{r}").unwrap();
        }
        f
    }

    #[test]
    fn digits_csv_rows() {
        let zeros = vec!["0"; 64].join(",");
        let sixteens = format!("{},7", vec!["16"; 64].join(","));
        let short = vec!["1"; 63].join(",");
        let bad = format!("{},x", vec!["1"; 63].join(","));
        let f = write_csv(&[zeros, sixteens, short, bad]);

        let a = load_digits_csv(f.path(), 0).unwrap();
        assert_eq!(a.side(), 8);
        assert_eq!(a.bit_depth(), 4);
        assert!(a.pixels().iter().all(|&v| v == 0));

        let b = load_digits_csv(f.path(), 1).unwrap();
        assert!(b.pixels().iter().all(|&v| v == 15));

        let e = load_digits_csv(f.path(), 2).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = load_digits_csv(f.path(), 3).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
        assert!(load_digits_csv(f.path(), 10).is_err());
    }

    #[test]
    fn factor_one_is_identity() {
        let x = img(3, 4, &[0, 1, 2, 3, 4, 5, 6, 7, 15]);
        assert_eq!(downsample_local_mean(&x, 1).unwrap(), x);
    }

    fn arb_image() -> impl Strategy<Value = Image> {
        (1usize..12, 1u32..9).prop_flat_map(|(side, r)| {
            prop::collection::vec(0..=max_value(r), side * side)
                .prop_map(move |px| Image::new(side, r, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn pgm_round_trip_is_exact(x in arb_image()) {
            let back = parse_pgm(&pgm_string(&x), Path::new("p")).unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn quantize_is_idempotent_on_integers(v in prop::collection::vec(0u32..16, 0..50)) {
            let as_f: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            prop_assert_eq!(quantize_to_bits(&as_f, 4).unwrap(), v);
        }
    }
}
