use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use walkdir::WalkDir;

use crate::java::BuildDependency;

/// Where a class name was learned from. Lower tiers are tried first when
/// resolving a missing symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Jdk,
    Project,
    Classpath,
    Library,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    /// Import key: `a.b.C` or `static a.b.C.m`.
    pub key: String,
    pub origin: Origin,
}

/// JDK packages whose classes win ties against same-named classes elsewhere
/// in the platform, most common first.
const PREFERRED_PACKAGES: [&str; 10] = [
    "java.util",
    "java.util.function",
    "java.util.stream",
    "java.util.concurrent",
    "java.util.concurrent.atomic",
    "java.io",
    "java.nio.file",
    "java.time",
    "java.math",
    "java.lang.reflect",
];

static PACKAGE_DECL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*package\s+([\w.]+)\s*;").unwrap());

/// Simple name to the qualified names that could be imported for it.
#[derive(Debug, Clone, Default)]
pub struct ClassIndex {
    by_simple: BTreeMap<String, Vec<IndexEntry>>,
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

impl ClassIndex {
    pub fn new() -> Self {
        ClassIndex::default()
    }

    /// Platform classes plus commonly statically imported library members.
    pub fn builtin() -> Self {
        let mut index = ClassIndex::new();
        for q in data_lines(include_str!("../../data/jdk-classes")) {
            index.insert(q, false, Origin::Jdk);
        }
        for q in data_lines(include_str!("../../data/static-members")) {
            index.insert(q, true, Origin::Library);
        }
        index
    }

    /// Registers `qualified`. Static entries name a member (`Owner.member`).
    pub fn insert(&mut self, qualified: &str, is_static: bool, origin: Origin) {
        let Some(simple) = qualified.rsplit('.').next().filter(|s| !s.is_empty()) else {
            return;
        };
        let key = if is_static {
            format!("static {qualified}")
        } else {
            qualified.to_string()
        };
        let entries = self.by_simple.entry(simple.to_string()).or_default();
        if let Some(existing) = entries.iter_mut().find(|e| e.key == key) {
            existing.origin = existing.origin.min(origin);
        } else {
            entries.push(IndexEntry { key, origin });
        }
    }

    /// Adds every top-level type declared in `.java` files under `root`.
    pub fn add_sources(&mut self, root: &Path) -> usize {
        let mut added = 0;
        let walker = WalkDir::new(root)
            .into_iter()
            .filter_entry(|e| !matches!(e.file_name().to_str(), Some("target" | ".git" | "node_modules")));
        for entry in walker.filter_map(Result::ok) {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("java") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if matches!(stem, "package-info" | "module-info") {
                continue;
            }
            let Ok(text) = std::fs::read_to_string(path) else {
                continue;
            };
            let qualified = match PACKAGE_DECL.captures(&text) {
                Some(c) => format!("{}.{stem}", &c[1]),
                None => stem.to_string(),
            };
            self.insert(&qualified, false, Origin::Project);
            added += 1;
        }
        added
    }

    /// Adds the public top-level classes listed in a jar.
    pub fn add_jar(&mut self, jar: &Path) -> std::io::Result<usize> {
        let archive = zip::ZipArchive::new(File::open(jar)?).map_err(std::io::Error::other)?;
        let names: Vec<String> = archive
            .file_names()
            .filter_map(|n| n.strip_suffix(".class"))
            .filter(|n| !n.contains('$') && !n.ends_with("module-info") && !n.ends_with("package-info"))
            .filter(|n| !n.starts_with("META-INF/"))
            .map(|n| n.replace('/', "."))
            .collect();
        for n in &names {
            self.insert(n, false, Origin::Classpath);
        }
        Ok(names.len())
    }

    /// Adds every jar of a platform-separated classpath string; missing or
    /// unreadable entries are skipped.
    pub fn add_classpath(&mut self, classpath: &str) -> usize {
        std::env::split_paths(classpath)
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("jar"))
            .filter_map(|p| self.add_jar(&p).ok())
            .sum()
    }

    pub fn len(&self) -> usize {
        self.by_simple.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_simple.is_empty()
    }

    /// Import keys for `simple`, best first: names spelled out in `hints`,
    /// then platform classes (preferred packages first), project classes,
    /// classpath classes and known library members; ties break alphabetically.
    pub fn candidates(&self, simple: &str, hints: &str) -> Vec<String> {
        let Some(entries) = self.by_simple.get(simple) else {
            return Vec::new();
        };
        let mut ranked: Vec<(bool, Origin, usize, &str)> = entries
            .iter()
            .map(|e| {
                let qualified = e.key.strip_prefix("static ").unwrap_or(&e.key);
                let package = qualified.rsplit_once('.').map(|(p, _)| p).unwrap_or("");
                let preference = PREFERRED_PACKAGES
                    .iter()
                    .position(|p| *p == package)
                    .unwrap_or(PREFERRED_PACKAGES.len() + usize::from(!package.starts_with("java.")));
                (!hints.contains(qualified), e.origin, preference, e.key.as_str())
            })
            .collect();
        ranked.sort();
        ranked.into_iter().map(|(_, _, _, k)| k.to_string()).collect()
    }
}

/// Package prefix to the dependency that provides it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoordinateTable {
    entries: BTreeMap<String, BuildDependency>,
}

impl CoordinateTable {
    pub fn builtin() -> Self {
        CoordinateTable::parse(include_str!("../../data/package-coordinates")).expect("builtin table")
    }

    /// Parses `package.prefix -> group:artifact:version` lines.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut table = CoordinateTable::default();
        for line in data_lines(text) {
            let (prefix, coordinate) = line
                .split_once("->")
                .ok_or_else(|| format!("expected `prefix -> group:artifact:version`, got `{line}`"))?;
            table
                .entries
                .insert(prefix.trim().to_string(), coordinate.trim().parse()?);
        }
        Ok(table)
    }

    /// Entries of `other` override same-prefix entries here.
    pub fn extend(&mut self, other: CoordinateTable) {
        self.entries.extend(other.entries);
    }

    /// Coordinate of the longest prefix that equals `package` or is one of
    /// its parent packages.
    pub fn lookup(&self, package: &str) -> Option<&BuildDependency> {
        self.entries
            .iter()
            .filter(|(prefix, _)| {
                package == prefix.as_str()
                    || package
                        .strip_prefix(prefix.as_str())
                        .is_some_and(|rest| rest.starts_with('.'))
            })
            .max_by_key(|(prefix, _)| prefix.len())
            .map(|(_, dep)| dep)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
