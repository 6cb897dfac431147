//! Binary PGM export of selected features on grid-shaped feature spaces.

use std::path::Path;

use crate::error::{Error, Result};

/// Write a `P5` PGM of `height x width` pixels with the selected feature
/// positions white (255) and everything else black (0). Feature index `j`
/// maps to pixel `(j / width, j % width)` in row-major order.
pub fn export_mask(selected: &[usize], grid: (usize, usize), path: &Path) -> Result<()> {
    let (height, width) = grid;
    if height == 0 || width == 0 {
        return Err(Error::config("mask grid must be at least 1x1"));
    }
    let d = height * width;
    if let Some(&bad) = selected.iter().find(|&&j| j >= d) {
        return Err(Error::config(format!(
            "selected index {bad} does not fit a {height}x{width} grid"
        )));
    }
    let mut pixels = vec![0u8; d];
    for &j in selected {
        pixels[j] = 255;
    }
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(&pixels);
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal independent P5 reader: header tokens then raw bytes.
    fn read_pgm(path: &Path) -> (usize, usize, u8, Vec<u8>) {
        let bytes = std::fs::read(path).unwrap();
        let header_end = bytes
            .windows(1)
            .enumerate()
            .filter(|(_, w)| w[0] == b'\n')
            .map(|(i, _)| i)
            .nth(2)
            .unwrap()
            + 1;
        let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
        let mut tokens = header.split_whitespace();
        assert_eq!(tokens.next(), Some("P5"));
        let width: usize = tokens.next().unwrap().parse().unwrap();
        let height: usize = tokens.next().unwrap().parse().unwrap();
        let maxval: u8 = tokens.next().unwrap().parse().unwrap();
        (height, width, maxval, bytes[header_end..].to_vec())
    }

    #[test]
    fn full_selection_is_all_white() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.pgm");
        let all: Vec<usize> = (0..28 * 28).collect();
        export_mask(&all, (28, 28), &path).unwrap();
        let (h, w, maxval, pixels) = read_pgm(&path);
        assert_eq!((h, w, maxval), (28, 28, 255));
        assert!(pixels.iter().all(|&p| p == 255));
        assert_eq!(pixels.len(), 784);
    }

    #[test]
    fn empty_selection_is_all_black() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.pgm");
        export_mask(&[], (4, 5), &path).unwrap();
        let (h, w, _, pixels) = read_pgm(&path);
        assert_eq!((h, w), (4, 5));
        assert!(pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn round_trip_recovers_the_exact_set() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.pgm");
        let selected = vec![0, 7, 11, 12, 19];
        export_mask(&selected, (4, 5), &path).unwrap();
        let (_, _, _, pixels) = read_pgm(&path);
        let recovered: Vec<usize> = pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == 255)
            .map(|(j, _)| j)
            .collect();
        assert_eq!(recovered, selected);
    }

    #[test]
    fn out_of_grid_index_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        assert!(export_mask(&[20], (4, 5), &path).is_err());
    }
}
