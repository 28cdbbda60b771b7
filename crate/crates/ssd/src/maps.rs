//! Plain-text map layouts.
//!
//! `@` wall, `W` waste field, `A` apple field, `P` agent spawn point, space empty.
//! Every other character is rejected.

use crate::env::EnvError;

pub const CLEANUP_10X10: &str = include_str!("../maps/cleanup_10x10.txt");
pub const CLEANUP_25X18: &str = include_str!("../maps/cleanup_25x18.txt");
pub const CLEANUP_48X18: &str = include_str!("../maps/cleanup_48x18.txt");
pub const HARVEST_32X18: &str = include_str!("../maps/harvest_32x18.txt");

/// Looks up a bundled layout by file stem, e.g. `cleanup_10x10`.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "cleanup_10x10" => Some(CLEANUP_10X10),
        "cleanup_25x18" => Some(CLEANUP_25X18),
        "cleanup_48x18" => Some(CLEANUP_48X18),
        "harvest_32x18" => Some(HARVEST_32X18),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tile {
    Wall,
    WasteField,
    AppleField,
    Spawn,
    Open,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    pub tiles: Vec<Tile>,
}

impl Layout {
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let cols = lines.first().map(|l| l.chars().count()).ok_or_else(|| EnvError::Map("empty layout".into()))?;
        let mut tiles = Vec::with_capacity(lines.len() * cols);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(EnvError::Map(format!("row {r} has {} columns, expected {cols}", line.chars().count())));
            }
            for (c, ch) in line.chars().enumerate() {
                tiles.push(match ch {
                    '@' => Tile::Wall,
                    'W' => Tile::WasteField,
                    'A' => Tile::AppleField,
                    'P' => Tile::Spawn,
                    ' ' => Tile::Open,
                    other => return Err(EnvError::Map(format!("unknown tile {other:?} at row {r}, column {c}"))),
                });
            }
        }
        Ok(Layout { rows: lines.len(), cols, tiles })
    }

    pub fn count(&self, tile: Tile) -> usize {
        self.tiles.iter().filter(|&&t| t == tile).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sizes() {
        for (text, rows, cols) in [(CLEANUP_10X10, 10, 10), (CLEANUP_25X18, 18, 25), (CLEANUP_48X18, 18, 48)] {
            let l = Layout::parse(text).unwrap();
            assert_eq!((l.rows, l.cols), (rows, cols));
            assert!(l.count(Tile::WasteField) > 0 && l.count(Tile::AppleField) > 0);
        }
        let h = Layout::parse(HARVEST_32X18).unwrap();
        assert_eq!(h.count(Tile::WasteField), 0);
        assert!(h.count(Tile::Spawn) >= 10);
    }

    #[test]
    fn rejects_ragged_and_unknown() {
        assert!(Layout::parse("@@@\n@ \n@@@\n").is_err());
        assert!(Layout::parse("@@@\n@x@\n@@@\n").is_err());
    }
}
