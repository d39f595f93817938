//! Domain label vocabulary and the per-image label record.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three axes that group the eight categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Appearance,
    Scene,
    Geometry,
}

impl Axis {
    pub fn title(self) -> &'static str {
        match self {
            Axis::Appearance => "Image Appearance",
            Axis::Scene => "Scene Composition",
            Axis::Geometry => "Acquisition Geometry",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Visibility,
    Illumination,
    Color,
    Layout,
    Scale,
    Background,
    Orientation,
    Perspective,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Visibility,
        Category::Illumination,
        Category::Color,
        Category::Layout,
        Category::Scale,
        Category::Background,
        Category::Orientation,
        Category::Perspective,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Visibility => "visibility",
            Category::Illumination => "illumination",
            Category::Color => "color",
            Category::Layout => "layout",
            Category::Scale => "scale",
            Category::Background => "background",
            Category::Orientation => "orientation",
            Category::Perspective => "perspective",
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Category::Visibility | Category::Illumination | Category::Color => Axis::Appearance,
            Category::Layout | Category::Scale | Category::Background => Axis::Scene,
            Category::Orientation | Category::Perspective => Axis::Geometry,
        }
    }

    /// Condition names from the low end of the category to the high end.
    pub fn conditions(self) -> &'static [&'static str] {
        match self {
            Category::Visibility => Visibility::NAMES,
            Category::Illumination => Illumination::NAMES,
            Category::Color => Color::NAMES,
            Category::Layout => Layout::NAMES,
            Category::Scale => Scale::NAMES,
            Category::Background => Background::NAMES,
            Category::Orientation => Orientation::NAMES,
            Category::Perspective => Perspective::NAMES,
        }
    }

    /// Color has no natural order; every other category does.
    pub fn is_ordered(self) -> bool {
        self != Category::Color
    }

    /// Conditions evaluated in stratified reports: both extremes for ordered
    /// categories, every condition for color.
    pub fn evaluated_conditions(self) -> Vec<&'static str> {
        let all = self.conditions();
        if self.is_ordered() {
            vec![all[0], all[all.len() - 1]]
        } else {
            all.to_vec()
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// A categorical value belonging to one [`Category`].
pub trait Condition: Copy + Eq + fmt::Debug {
    const CATEGORY: Category;
    const NAMES: &'static [&'static str];
    fn as_str(self) -> &'static str;
}

macro_rules! condition_enum {
    ($(#[$doc:meta])* $name:ident, $cat:expr, [$($variant:ident => $text:literal),+ $(,)?]) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl Condition for $name {
            const CATEGORY: Category = $cat;
            const NAMES: &'static [&'static str] = &[$($text),+];

            fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

condition_enum!(Visibility, Category::Visibility, [Low => "low", Moderate => "moderate", High => "high"]);
condition_enum!(Illumination, Category::Illumination, [Dark => "dark", Medium => "medium", Bright => "bright"]);
condition_enum!(Color, Category::Color, [Blue => "blue", Natural => "natural", Green => "green"]);
condition_enum!(Layout, Category::Layout, [Sparse => "sparse", Moderate => "moderate", Crowded => "crowded"]);
condition_enum!(Scale, Category::Scale, [Small => "small", Medium => "medium", Large => "large"]);
condition_enum!(Background, Category::Background, [Simple => "simple", Textured => "textured", Complex => "complex"]);
condition_enum!(Orientation, Category::Orientation, [
    Upright => "upright",
    SlightlyTilted => "slightly_tilted",
    Rotated => "rotated",
]);
condition_enum!(Perspective, Category::Perspective, [Nadir => "nadir", Oblique => "oblique", Front => "front"]);

/// Reasons attached to unlabeled categories.
pub mod reason {
    pub const NO_OBJECTS: &str = "no_objects";
    pub const NO_DEPTH: &str = "no_depth";
    pub const DEPTH_UNREADABLE: &str = "depth_unreadable";
    pub const BACKGROUND_TOO_SMALL: &str = "background_too_small";
    pub const REGION_UNDERPOPULATED: &str = "region_underpopulated";
}

/// Either a condition or the reason it could not be assigned.
///
/// Serialized as the bare condition string, or `{"unlabeled": "<reason>"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Assignment<T> {
    Labeled(T),
    Unlabeled { unlabeled: String },
}

impl<T: Condition> Assignment<T> {
    pub fn unlabeled(reason: impl Into<String>) -> Self {
        Assignment::Unlabeled {
            unlabeled: reason.into(),
        }
    }

    pub fn label(&self) -> Option<T> {
        match self {
            Assignment::Labeled(t) => Some(*t),
            Assignment::Unlabeled { .. } => None,
        }
    }

    pub fn name(&self) -> std::result::Result<&'static str, &str> {
        match self {
            Assignment::Labeled(t) => Ok(t.as_str()),
            Assignment::Unlabeled { unlabeled } => Err(unlabeled.as_str()),
        }
    }
}

mod ratio_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad ratio `{t}`"))),
        }
    }
}

/// Raw metric values. Fields are `None` where the metric is undefined for
/// the image (no objects, too little background, no depth map).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMetrics {
    pub tenengrad: f64,
    pub laplacian_var: f64,
    pub rms_contrast: f64,
    pub freq_energy: f64,
    pub median_luminance: f64,
    pub overexposed_ratio: f64,
    pub underexposed_ratio: f64,
    pub mean_r: f64,
    pub mean_g: f64,
    pub mean_b: f64,
    pub color_distortion: f64,
    /// `"inf"` in JSON when green is absent but blue is not.
    #[serde(with = "ratio_serde")]
    pub blue_green_ratio: f64,
    pub object_count: usize,
    pub coverage: f64,
    pub overlap: f64,
    pub mean_norm_area: Option<f64>,
    pub small_ratio: Option<f64>,
    pub large_ratio: Option<f64>,
    pub keypoint_density: Option<f64>,
    pub edge_density: Option<f64>,
    pub laplacian_mean: Option<f64>,
    pub delta_lr: Option<f64>,
    pub delta_tb: Option<f64>,
    pub depth_range: Option<f64>,
    pub brightness_gradient: f64,
}

/// Normalized components in `[0, 1]` and the two weighted scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    pub tenengrad: f64,
    pub laplacian_var: f64,
    pub rms_contrast: f64,
    pub freq_energy: f64,
    pub visibility_score: f64,
    pub keypoint_density: Option<f64>,
    pub edge_density: Option<f64>,
    pub laplacian_mean: Option<f64>,
    pub background_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub raw: RawMetrics,
    pub normalized: NormalizedMetrics,
}

pub const LABEL_SCHEMA: &str = "v1";

/// One JSON Lines record of the label file. Field order is the on-disk key
/// order: `schema, image_id, file_name, profile_id`, the eight categories in
/// axis order, then `metrics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainLabelRecord {
    pub schema: String,
    pub image_id: u64,
    pub file_name: String,
    pub profile_id: String,
    pub visibility: Assignment<Visibility>,
    pub illumination: Assignment<Illumination>,
    pub color: Assignment<Color>,
    pub layout: Assignment<Layout>,
    pub scale: Assignment<Scale>,
    pub background: Assignment<Background>,
    pub orientation: Assignment<Orientation>,
    pub perspective: Assignment<Perspective>,
    pub metrics: MetricVector,
}

impl DomainLabelRecord {
    /// Condition name for a category, or the unlabeled reason.
    pub fn condition(&self, category: Category) -> std::result::Result<&'static str, &str> {
        match category {
            Category::Visibility => self.visibility.name(),
            Category::Illumination => self.illumination.name(),
            Category::Color => self.color.name(),
            Category::Layout => self.layout.name(),
            Category::Scale => self.scale.name(),
            Category::Background => self.background.name(),
            Category::Orientation => self.orientation.name(),
            Category::Perspective => self.perspective.name(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_json_shapes() {
        let a: Assignment<Visibility> = Assignment::Labeled(Visibility::Low);
        assert_eq!(serde_json::to_string(&a).unwrap(), "\"low\"");
        let u: Assignment<Scale> = Assignment::unlabeled(reason::NO_OBJECTS);
        let text = serde_json::to_string(&u).unwrap();
        assert_eq!(text, r#"{"unlabeled":"no_objects"}"#);
        let back: Assignment<Scale> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, u);
        let tilted: Assignment<Orientation> = serde_json::from_str("\"slightly_tilted\"").unwrap();
        assert_eq!(tilted.label(), Some(Orientation::SlightlyTilted));
    }

    #[test]
    fn evaluated_conditions_are_endpoints() {
        assert_eq!(Category::Visibility.evaluated_conditions(), vec!["low", "high"]);
        assert_eq!(Category::Color.evaluated_conditions(), vec!["blue", "natural", "green"]);
        let total: usize = Category::ALL.iter().map(|c| c.evaluated_conditions().len()).sum();
        assert_eq!(total, 17);
    }

    #[test]
    fn category_round_trips_through_str() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
        }
        assert!("depth".parse::<Category>().is_err());
    }
}
