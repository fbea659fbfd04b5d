//! The ATIS-compatible label inventory, feature manifest and gazetteers
//! shipped with the crate.

use std::fs;
use std::io;
use std::path::Path;

use crate::corpus::LabelInventory;
use crate::features::{
    load_feature_spec, FeatureRegistry, FeatureSpec, GazetteerBundle, GazetteerFile, Weights,
    MANIFEST_FILE,
};

pub const ATIS_LABELS: &str = include_str!("../data/atis/labels.txt");
pub const ATIS_MANIFEST: &str = include_str!("../data/atis/gazetteers/features.tsv");

/// `(feature name, file content)` for every shipped gazetteer.
pub const ATIS_GAZETTEERS: &[(&str, &str)] = &[
    (
        "airline_code",
        include_str!("../data/atis/gazetteers/airline_code.txt"),
    ),
    (
        "airline_name_1",
        include_str!("../data/atis/gazetteers/airline_name_1.txt"),
    ),
    (
        "airport_code",
        include_str!("../data/atis/gazetteers/airport_code.txt"),
    ),
    (
        "airport_name_1",
        include_str!("../data/atis/gazetteers/airport_name_1.txt"),
    ),
    ("am_pm", include_str!("../data/atis/gazetteers/am_pm.txt")),
    (
        "city_name_1",
        include_str!("../data/atis/gazetteers/city_name_1.txt"),
    ),
    (
        "class_type",
        include_str!("../data/atis/gazetteers/class_type.txt"),
    ),
    (
        "day_name",
        include_str!("../data/atis/gazetteers/day_name.txt"),
    ),
    (
        "day_number",
        include_str!("../data/atis/gazetteers/day_number.txt"),
    ),
    (
        "month_name",
        include_str!("../data/atis/gazetteers/month_name.txt"),
    ),
    (
        "period_of_day",
        include_str!("../data/atis/gazetteers/period_of_day.txt"),
    ),
    (
        "state_name_1",
        include_str!("../data/atis/gazetteers/state_name_1.txt"),
    ),
];

pub fn atis_labels() -> LabelInventory {
    ATIS_LABELS
        .parse()
        .expect("shipped label inventory is valid")
}

pub fn atis_feature_spec() -> FeatureSpec {
    load_feature_spec(ATIS_MANIFEST, &atis_labels()).expect("shipped manifest is valid")
}

pub fn atis_bundle() -> GazetteerBundle {
    GazetteerBundle {
        spec: atis_feature_spec(),
        gazetteers: ATIS_GAZETTEERS
            .iter()
            .map(|(name, text)| GazetteerFile::parse(*name, text))
            .collect(),
        weights: Weights::default(),
    }
}

/// Registry built from the shipped gazetteers alone, without corpus labels.
pub fn atis_registry() -> FeatureRegistry {
    atis_bundle()
        .build(None)
        .expect("shipped gazetteers are valid")
}

/// Writes the manifest and gazetteer files into `dir`.
pub fn write_atis_gazetteers(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(MANIFEST_FILE), ATIS_MANIFEST)?;
    for (name, text) in ATIS_GAZETTEERS {
        fs::write(dir.join(format!("{name}.txt")), text)?;
    }
    Ok(())
}
