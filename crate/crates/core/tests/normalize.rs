//! End-to-end normalization over the corpus: the output must be in normal
//! form, and every recorded pipeline stage must preserve the reference
//! language.

use hornlab_core::corpus;
use hornlab_core::fixpoint::accepts;
use hornlab_core::logic::validate::{validate, ValidateOpts};
use hornlab_core::normalize::{check_normal, normalize, NormalizeOpts};

#[test]
fn corpus_normalizes_to_normal_form() {
    for e in corpus::entries() {
        let f = corpus::parse_entry(&e);
        let v = validate(&f, &ValidateOpts::default()).unwrap();
        let n = normalize(&v.formula, &NormalizeOpts::default())
            .unwrap_or_else(|err| panic!("{}: {err}", e.name));
        if let Err(errs) = check_normal(&n.formula) {
            panic!("{}: {errs:?}", e.name);
        }
        let alphabet = n.formula.alphabet.clone();
        for w in alphabet.words_up_to(6) {
            let want = (e.reference)(&w);
            assert_eq!(
                accepts(&n.formula, &w).unwrap(),
                want,
                "{} on {:?}",
                e.name,
                alphabet.render(&w)
            );
        }
    }
}

#[test]
fn corpus_traces_preserve_language() {
    for e in corpus::entries() {
        let f = corpus::parse_entry(&e);
        let v = validate(&f, &ValidateOpts::default()).unwrap();
        let n = normalize(&v.formula, &NormalizeOpts::default()).unwrap();
        let alphabet = n.formula.alphabet.clone();
        for w in alphabet.words_up_to(4) {
            let want = (e.reference)(&w);
            for (name, g) in &n.trace.steps {
                assert_eq!(
                    accepts(g, &w).unwrap(),
                    want,
                    "{} stage '{name}' on {:?}",
                    e.name,
                    alphabet.render(&w)
                );
            }
        }
    }
}
