//! Background colors used by common video players.
//!
//! The built-in registry records, for each player, the background it shows
//! behind transparent pixels in its full-size viewer and in thumbnails.
//! A player missing from one of the two surveys has `None` for that mode.
//! The exact grey level is not standardized; [`BackgroundColor::GREY`] is
//! this toolkit's choice.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming a TOML preset registry to load instead of
/// the built-in one.
pub const PRESETS_ENV: &str = "ALPHACLOAK_PRESETS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BackgroundColor {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl BackgroundColor {
    pub const BLACK: Self = Self::new(0, 0, 0);
    pub const GREY: Self = Self::new(128, 128, 128);
    pub const WHITE: Self = Self::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }
}

impl fmt::Display for BackgroundColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl FromStr for BackgroundColor {
    type Err = Error;

    /// Accepts `black`, `grey`/`gray`, `white`, `#rrggbb` or `r,g,b`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad color {s:?}; use a name, #rrggbb or r,g,b"));
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "black" => return Ok(Self::BLACK),
            "grey" | "gray" => return Ok(Self::GREY),
            "white" => return Ok(Self::WHITE),
            _ => {}
        }
        if let Some(hex) = s.strip_prefix('#') {
            if hex.len() != 6 || !hex.is_ascii() {
                return Err(bad());
            }
            let ch = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
            return Ok(Self::new(ch(0)?, ch(2)?, ch(4)?));
        }
        let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<u8>()).collect();
        match parts.as_slice() {
            [Ok(r), Ok(g), Ok(b)] => Ok(Self::new(*r, *g, *b)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for BackgroundColor {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BackgroundColor> for String {
    fn from(c: BackgroundColor) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewMode {
    Viewer,
    Thumbnail,
}

impl FromStr for ViewMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "viewer" => Ok(Self::Viewer),
            "thumbnail" => Ok(Self::Thumbnail),
            _ => Err(Error::invalid(format!("unknown view mode {s:?} (viewer | thumbnail)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerPreset {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewer_bg: Option<BackgroundColor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumbnail_bg: Option<BackgroundColor>,
}

impl PlayerPreset {
    pub fn background(&self, mode: ViewMode) -> Option<BackgroundColor> {
        match mode {
            ViewMode::Viewer => self.viewer_bg,
            ViewMode::Thumbnail => self.thumbnail_bg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetRegistry {
    #[serde(rename = "player")]
    players: Vec<PlayerPreset>,
}

impl PresetRegistry {
    pub fn new(players: Vec<PlayerPreset>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &players {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::invalid(format!("duplicate player preset {:?}", p.name)));
            }
        }
        Ok(Self { players })
    }

    pub fn builtin() -> Self {
        use BackgroundColor as C;
        let p = |name: &str, viewer: Option<C>, thumbnail: Option<C>| PlayerPreset {
            name: name.to_owned(),
            viewer_bg: viewer,
            thumbnail_bg: thumbnail,
        };
        let (black, grey, white) = (Some(C::BLACK), Some(C::GREY), Some(C::WHITE));
        Self {
            players: vec![
                p("vlc", black, black),
                p("quicktime", black, None),
                p("apple-tv", black, black),
                p("clipchamp", black, None),
                p("premiere-pro", black, black),
                p("capcut", black, black),
                p("vimeo", black, white),
                p("youtube", grey, grey),
                p("google-drive", grey, grey),
                p("onedrive", grey, grey),
                p("amazon-drive", grey, grey),
                p("iphone-photos", white, grey),
                p("macos-finder", None, black),
            ],
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: Self = toml::from_str(s).map_err(|e| Error::format(format!("preset registry: {e}")))?;
        Self::new(raw.players)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("registry serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Registry from `ALPHACLOAK_PRESETS` if set, else the built-in one.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(PRESETS_ENV) {
            Some(path) => Self::load(Path::new(&path)),
            None => Ok(Self::builtin()),
        }
    }

    pub fn players(&self) -> &[PlayerPreset] {
        &self.players
    }

    pub fn get(&self, name: &str) -> Option<&PlayerPreset> {
        self.players.iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.players.iter().map(|p| p.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_matches_player_survey() {
        let reg = PresetRegistry::builtin();
        let bg = |name: &str, mode| reg.get(name).unwrap().background(mode);
        use BackgroundColor as C;
        use ViewMode::*;
        let viewer_black = ["vlc", "quicktime", "apple-tv", "clipchamp", "premiere-pro", "capcut", "vimeo"];
        let viewer_grey = ["youtube", "google-drive", "onedrive", "amazon-drive"];
        let thumb_black = ["vlc", "macos-finder", "apple-tv", "premiere-pro", "capcut"];
        let thumb_grey = ["youtube", "google-drive", "onedrive", "amazon-drive", "iphone-photos"];
        for n in viewer_black {
            assert_eq!(bg(n, Viewer), Some(C::BLACK), "{n}");
        }
        for n in viewer_grey {
            assert_eq!(bg(n, Viewer), Some(C::GREY), "{n}");
        }
        assert_eq!(bg("iphone-photos", Viewer), Some(C::WHITE));
        for n in thumb_black {
            assert_eq!(bg(n, Thumbnail), Some(C::BLACK), "{n}");
        }
        for n in thumb_grey {
            assert_eq!(bg(n, Thumbnail), Some(C::GREY), "{n}");
        }
        assert_eq!(bg("vimeo", Thumbnail), Some(C::WHITE));

        let viewer_total = reg.players().iter().filter(|p| p.viewer_bg.is_some()).count();
        let thumb_total = reg.players().iter().filter(|p| p.thumbnail_bg.is_some()).count();
        assert_eq!(viewer_total, viewer_black.len() + viewer_grey.len() + 1);
        assert_eq!(thumb_total, thumb_black.len() + thumb_grey.len() + 1);
    }

    #[test]
    fn toml_round_trip() {
        let reg = PresetRegistry::builtin();
        let text = reg.to_toml_string();
        assert!(text.contains("[[player]]"));
        assert_eq!(PresetRegistry::from_toml_str(&text).unwrap(), reg);
    }

    #[test]
    fn user_registry_and_duplicates() {
        let text = "[[player]]\nname = \"kiosk\"\nviewer_bg = \"10,20,30\"\n";
        let reg = PresetRegistry::from_toml_str(text).unwrap();
        assert_eq!(
            reg.get("kiosk").unwrap().background(ViewMode::Viewer),
            Some(BackgroundColor::new(10, 20, 30))
        );
        let dup = format!("{text}{text}");
        assert!(PresetRegistry::from_toml_str(&dup).is_err());
        assert!(PresetRegistry::from_toml_str("[[player]]\nname = \"x\"\nviewer_bg = \"#zz0000\"\n").is_err());
    }

    #[test]
    fn color_parsing() {
        assert_eq!("gray".parse::<BackgroundColor>().unwrap(), BackgroundColor::GREY);
        assert_eq!("#ff8000".parse::<BackgroundColor>().unwrap(), BackgroundColor::new(255, 128, 0));
        assert_eq!(" 1, 2,3 ".parse::<BackgroundColor>().unwrap(), BackgroundColor::new(1, 2, 3));
        assert!("1,2".parse::<BackgroundColor>().is_err());
        assert!("256,0,0".parse::<BackgroundColor>().is_err());
        assert_eq!(BackgroundColor::GREY.to_string(), "#808080");
    }
}
