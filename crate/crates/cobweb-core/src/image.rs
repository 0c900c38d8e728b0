//! Labeled single-channel images.

use std::fmt;

/// A digit class label, 0 through 9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digit(u8);

impl Digit {
    pub fn new(d: u8) -> Option<Digit> {
        (d <= 9).then_some(Digit(d))
    }

    pub fn value(&self) -> u8 {
        self.0
    }

    pub fn symbol(&self) -> String {
        self.0.to_string()
    }

    pub fn from_symbol(s: &str) -> Option<Digit> {
        match s.as_bytes() {
            [b] if b.is_ascii_digit() => Digit::new(b - b'0'),
            _ => None,
        }
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A grid of continuous pixel intensities plus an optional digit label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
    label: Option<Digit>,
}

impl LabeledImage {
    /// `pixels` is row-major and must have exactly `rows × cols` finite values.
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>, label: Option<Digit>) -> LabeledImage {
        assert_eq!(
            pixels.len(),
            rows * cols,
            "pixel buffer does not match dimensions"
        );
        debug_assert!(
            pixels.iter().all(|p| p.is_finite()),
            "pixels must be finite"
        );
        LabeledImage {
            rows,
            cols,
            pixels,
            label,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }

    pub fn label(&self) -> Option<Digit> {
        self.label
    }

    pub fn with_label(&self, label: Option<Digit>) -> LabeledImage {
        LabeledImage {
            label,
            ..self.clone()
        }
    }
}
