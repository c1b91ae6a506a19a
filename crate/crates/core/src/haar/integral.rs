use crate::error::{Error, Result};

/// Summed-area table with a zero row and column in front:
/// `at(x, y)` is the sum of all pixels strictly above and left of `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<i64>,
}

impl IntegralImage {
    /// Builds the table of a `width × height` row-major image.
    pub fn new<T: Copy + Into<i64>>(width: usize, height: usize, pixels: &[T]) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size");
        let stride = width + 1;
        let mut table = vec![0i64; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0i64;
            for x in 0..width {
                row += pixels[y * width + x].into();
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        IntegralImage {
            width,
            height,
            table,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline(always)]
    fn at(&self, x: usize, y: usize) -> i64 {
        self.table[y * (self.width + 1) + x]
    }

    /// Sum of the `w × h` block with top-left `(x, y)`; no bounds check beyond
    /// the slice indexing.
    #[inline(always)]
    pub fn sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> i64 {
        self.at(x + w, y + h) - self.at(x, y + h) - self.at(x + w, y) + self.at(x, y)
    }

    pub fn rect_sum(&self, x: usize, y: usize, w: usize, h: usize) -> Result<i64> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::OutOfBounds(format!(
                "rect ({x}, {y}, {w}, {h}) outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(self.sum_unchecked(x, y, w, h))
    }
}
