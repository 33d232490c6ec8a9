//! The morphing pipeline: give a package a new label and icon, then rebuild,
//! align and re-sign it.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::apkzip::{
    align_archive, check_alignment, read_archive, write_archive, ArchiveModel, ZipError, DEFAULT_ALIGNMENT,
};
use crate::axml::{AttributeValue, AxmlDocument, AxmlError, LabelMode, ResourcePath, ResourceTable};
use crate::signer::{sign_archive, verify_v1, SignError, SigningMaterial};

pub const MANIFEST_ENTRY: &str = "AndroidManifest.xml";
pub const RESOURCE_TABLE_ENTRY: &str = "resources.arsc";
/// Icon key that targets every density variant at once.
pub const ALL_DENSITIES: &str = "all";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorphError {
    #[error("UnknownDensity: no icon variant for density {0:?}")]
    UnknownDensity(String),
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Axml(#[from] AxmlError),
    #[error("{0}")]
    Zip(#[from] ZipError),
    #[error("{0}")]
    Sign(#[from] SignError),
}

impl MorphError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::UnknownDensity(_) => "UnknownDensity",
            Self::InvalidSpec(_) => "InvalidSpec",
            Self::Axml(e) => e.name(),
            Self::Zip(e) => e.name(),
            Self::Sign(e) => e.name(),
        }
    }
}

/// What to change. An empty spec still rebuilds, aligns and re-signs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MorphSpec {
    pub new_name: Option<String>,
    /// Density qualifier (`mdpi`, `hdpi`, ...) or [`ALL_DENSITIES`] to
    /// replacement image bytes. Images are written as given.
    pub icons: BTreeMap<String, Vec<u8>>,
    pub label_mode: LabelMode,
}

impl MorphSpec {
    pub fn validate(&self) -> Result<(), MorphError> {
        if self.icons.contains_key(ALL_DENSITIES) && self.icons.len() > 1 {
            return Err(MorphError::InvalidSpec(format!(
                "{ALL_DENSITIES:?} cannot be combined with per-density icons"
            )));
        }
        if self.new_name.as_deref() == Some("") {
            return Err(MorphError::InvalidSpec("new name is empty".into()));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.new_name.is_none() && self.icons.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Label {
    Text { value: String },
    /// A resource reference, with its default string value when the
    /// resource table has one.
    Reference { id: u32, resolved: Option<String> },
    Missing,
}

impl Label {
    /// Display text: the inline value or the resolved reference.
    pub fn text(&self) -> Option<&str> {
        match self {
            Self::Text { value } => Some(value),
            Self::Reference { resolved, .. } => resolved.as_deref(),
            Self::Missing => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MorphReport {
    pub package_name: String,
    pub label: Label,
    pub icon_resource_id: Option<u32>,
    /// Icon files present in the archive, in resource table order.
    pub icon_paths: Vec<ResourcePath>,
    pub signed: bool,
    pub aligned: bool,
}

fn manifest(model: &ArchiveModel) -> Result<AxmlDocument, MorphError> {
    let entry = model
        .entry(MANIFEST_ENTRY)
        .ok_or_else(|| ZipError::EntryNotFound(MANIFEST_ENTRY.into()))?;
    Ok(AxmlDocument::parse(&entry.data)?)
}

fn resource_table(model: &ArchiveModel) -> Result<Option<ResourceTable>, MorphError> {
    model
        .entry(RESOURCE_TABLE_ENTRY)
        .map(|e| ResourceTable::parse(&e.data))
        .transpose()
        .map_err(Into::into)
}

const APPLICATION: &[&str] = &["manifest", "application"];

fn icon_paths(
    doc: &AxmlDocument,
    table: Option<&ResourceTable>,
    model: &ArchiveModel,
) -> Result<(Option<u32>, Vec<ResourcePath>), MorphError> {
    let paths = match doc.get_attribute(APPLICATION, "icon") {
        Ok(AttributeValue::Reference(id)) => {
            let table = table.ok_or(AxmlError::ResourceNotFound(id))?;
            (Some(id), table.resolve_resource_paths(id)?)
        }
        Ok(AttributeValue::String(i)) => {
            let path = doc.string(i).unwrap_or_default().to_owned();
            (
                None,
                vec![ResourcePath {
                    density: "default".into(),
                    path,
                }],
            )
        }
        Ok(_) | Err(AxmlError::AttributeNotFound(_)) => (None, Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let (id, mut list) = paths;
    list.retain(|p| model.contains(&p.path));
    Ok((id, list))
}

fn label(doc: &AxmlDocument, table: Option<&ResourceTable>) -> Result<Label, MorphError> {
    Ok(match doc.get_attribute(APPLICATION, "label") {
        Ok(AttributeValue::String(i)) => Label::Text {
            value: doc.string(i).unwrap_or_default().to_owned(),
        },
        Ok(AttributeValue::Reference(id)) => Label::Reference {
            id,
            resolved: table.and_then(|t| t.string_value(id)),
        },
        Ok(_) | Err(AxmlError::AttributeNotFound(_)) => Label::Missing,
        Err(e) => return Err(e.into()),
    })
}

/// Reports a package's identity, label, icon files, signature and alignment.
pub fn inspect(apk: &[u8]) -> Result<MorphReport, MorphError> {
    let model = read_archive(apk)?;
    let doc = manifest(&model)?;
    let table = resource_table(&model)?;
    let package_name = doc
        .get_attribute_text(&["manifest"], "package")?
        .unwrap_or_default();
    let (icon_resource_id, icon_paths) = icon_paths(&doc, table.as_ref(), &model)?;
    let signed = match verify_v1(apk) {
        Ok(report) => report.ok,
        Err(SignError::NotSigned) => false,
        Err(e) => return Err(e.into()),
    };
    Ok(MorphReport {
        package_name,
        label: label(&doc, table.as_ref())?,
        icon_resource_id,
        icon_paths,
        signed,
        aligned: check_alignment(apk, DEFAULT_ALIGNMENT)?.ok,
    })
}

fn replace_icons(model: &mut ArchiveModel, icons: &BTreeMap<String, Vec<u8>>) -> Result<(), MorphError> {
    let doc = manifest(model)?;
    let table = resource_table(model)?;
    let (_, paths) = icon_paths(&doc, table.as_ref(), model)?;
    for (density, image) in icons {
        let targets: Vec<&ResourcePath> = if density == ALL_DENSITIES {
            paths.iter().collect()
        } else {
            paths.iter().filter(|p| &p.density == density).collect()
        };
        if targets.is_empty() {
            return Err(MorphError::UnknownDensity(density.clone()));
        }
        for t in targets {
            model.replace_entry(&t.path, image.clone())?;
        }
    }
    Ok(())
}

/// Runs the whole pipeline and returns the new package bytes.
///
/// The archive is written, aligned and signed, and then aligned once more:
/// inserting the signature entries at the front shifts every later entry.
pub fn apply_morph(apk: &[u8], spec: &MorphSpec, material: &SigningMaterial) -> Result<Vec<u8>, MorphError> {
    spec.validate()?;
    let mut model = read_archive(apk)?;
    if !spec.icons.is_empty() {
        replace_icons(&mut model, &spec.icons)?;
    }
    if let Some(name) = &spec.new_name {
        let mut doc = manifest(&model)?;
        doc.set_label(name, spec.label_mode)?;
        model.replace_entry(MANIFEST_ENTRY, doc.serialize()?)?;
    }
    let aligned = align_archive(&write_archive(&model), DEFAULT_ALIGNMENT)?;
    let signed = sign_archive(read_archive(&aligned)?, material)?;
    Ok(align_archive(&write_archive(&signed), DEFAULT_ALIGNMENT)?)
}
