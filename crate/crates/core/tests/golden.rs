//! Renderer golden files: each `tests/golden/*.schema` must render to the
//! bytes in the matching `.svg`. Run with `VPLAN_BLESS=1` to regenerate the
//! domain schemas and every `.svg`.

use std::path::{Path, PathBuf};

use vplan_core::diagram::{render, schema_from_state, DiagramSchema, StyleMap};
use vplan_core::sim::{gen_instance, DomainId, GenParams, Size};

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn bless() -> bool {
    std::env::var_os("VPLAN_BLESS").is_some()
}

fn domain_schema(id: DomainId) -> String {
    let domain = id.domain();
    let problem = gen_instance(id, &GenParams::new(Size::smallest(id), 1)).unwrap();
    schema_from_state(&problem.init, &problem, &domain, &StyleMap::default_for(id))
        .unwrap()
        .to_text()
}

#[test]
fn domain_schemas_are_stable() {
    for id in DomainId::ALL {
        let path = golden_dir().join(format!("{id}.schema"));
        let text = domain_schema(id);
        if bless() {
            std::fs::write(&path, &text).unwrap();
        }
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text, "{id}");
    }
}

#[test]
fn schemas_render_to_their_golden_files() {
    let mut checked = 0;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(golden_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "schema"))
        .collect();
    entries.sort();
    for path in entries {
        let schema = DiagramSchema::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let first = render(&schema).unwrap().svg;
        assert_eq!(render(&schema).unwrap().svg, first, "{}", path.display());
        let svg_path = path.with_extension("svg");
        if bless() {
            std::fs::write(&svg_path, &first).unwrap();
        }
        let expected = std::fs::read_to_string(&svg_path).unwrap();
        assert!(expected == first, "{} differs from its golden file", path.display());
        checked += 1;
    }
    assert_eq!(checked, 7);
}
