//! Every chapter in the book is listed in SUMMARY.md and compiled by this
//! crate.

use std::path::Path;

fn book() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../book/src"))
}

fn chapters() -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(book())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|f| f.ends_with(".md") && f != "SUMMARY.md")
        .collect();
    v.sort();
    v
}

#[test]
fn summary_lists_every_chapter() {
    let summary = std::fs::read_to_string(book().join("SUMMARY.md")).unwrap();
    for c in chapters() {
        assert!(summary.contains(&format!("]({c})")), "{c} missing from SUMMARY.md");
    }
}

#[test]
fn every_chapter_is_compiled() {
    let lib = include_str!("../src/lib.rs");
    for c in chapters() {
        assert!(lib.contains(&format!("book/src/{c}\")")), "{c} is not included by the guide crate");
    }
}

#[test]
fn rust_snippets_are_not_ignored() {
    for c in chapters() {
        let text = std::fs::read_to_string(book().join(&c)).unwrap();
        assert!(!text.contains("```rust,ignore") && !text.contains("```ignore"), "{c} has an ignored snippet");
    }
}
