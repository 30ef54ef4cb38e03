use ndarray::Array2;
use polyprobe::data::{
    generate_corpus, generate_lid_corpus, load_conllu, load_lid_paragraphs, load_nli_tsv, write_conllu,
    write_lid_tsv, write_nli_tsv, CorpusSplit, FamilyConfig, LabelSet, LoadOptions, SyntheticLanguageSpec, TaskKind,
    NLI_LABELS,
};
use proptest::prelude::*;

fn family(n_languages: usize, seed: u64) -> Vec<SyntheticLanguageSpec> {
    SyntheticLanguageSpec::family(&FamilyConfig {
        n_languages,
        seed,
        ..FamilyConfig::default()
    })
    .unwrap()
}

fn loose() -> LoadOptions {
    LoadOptions {
        min_chars: 0,
        ..LoadOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn token_tag_round_trip(seed in 0u64..1000, n in 1usize..20) {
        let specs = family(3, seed);
        let vocab = SyntheticLanguageSpec::vocabulary(&specs);
        let langs = SyntheticLanguageSpec::language_set(&specs);
        let tags = SyntheticLanguageSpec::tag_set();
        let corpus = generate_corpus(&specs, n, TaskKind::TokenTag, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("task.conllu");
        write_conllu(&path, &corpus, &vocab, &tags, &langs).unwrap();
        prop_assert_eq!(load_conllu(&path, &vocab, &tags, &langs, &loose()).unwrap(), corpus);
    }

    #[test]
    fn pair_inference_round_trip(seed in 0u64..1000, n in 1usize..20) {
        let specs = family(2, seed);
        let vocab = SyntheticLanguageSpec::vocabulary(&specs);
        let langs = SyntheticLanguageSpec::language_set(&specs);
        let corpus = generate_corpus(&specs, n, TaskKind::PairInference, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("task.tsv");
        write_nli_tsv(&path, &corpus, &vocab, &langs).unwrap();
        prop_assert_eq!(load_nli_tsv(&path, &vocab, &langs, &loose()).unwrap(), corpus);
    }

    #[test]
    fn lid_round_trip(seed in 0u64..1000, n in 1usize..10) {
        let specs = family(4, seed);
        let vocab = SyntheticLanguageSpec::vocabulary(&specs);
        let langs = SyntheticLanguageSpec::language_set(&specs);
        let corpus = generate_lid_corpus(&specs, n, 100, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lid.tsv");
        write_lid_tsv(&path, &corpus, &vocab, &langs).unwrap();
        prop_assert_eq!(load_lid_paragraphs(&path, &vocab, &langs, &loose()).unwrap(), corpus);
    }

    #[test]
    fn splits_partition_each_language(seed in 0u64..1000, n in 4usize..60) {
        let specs = family(3, 1);
        let corpus = generate_corpus(&specs, n, TaskKind::TokenTag, 2).unwrap();
        let split = CorpusSplit::new(&corpus, [0.7, 0.1, 0.1, 0.1], seed).unwrap();
        let total: usize = split.parts().iter().map(|p| p.len()).sum();
        prop_assert_eq!(total, corpus.len());
        for lang in 0..3 {
            for (part, frac) in split.parts().iter().zip([0.7, 0.1, 0.1, 0.1]) {
                let got = part.iter().filter(|e| e.language == lang).count() as f64;
                prop_assert!((got - frac * n as f64).abs() <= 1.0);
            }
        }
        // Every source example appears exactly once; generated sentences can
        // repeat, so compare multisets.
        let key = |e: &polyprobe::data::LabeledExample| format!("{e:?}");
        let mut all: Vec<String> = split.parts().iter().flat_map(|p| p.iter().map(key)).collect();
        let mut src: Vec<String> = corpus.iter().map(key).collect();
        all.sort();
        src.sort();
        prop_assert_eq!(all, src);
    }
}

#[test]
fn nli_labels_are_the_three_classes() {
    assert_eq!(LabelSet::new(NLI_LABELS).len(), 3);
}

/// Softmax regression over normalised bag-of-token-id counts, trained by
/// full-batch gradient descent.
fn fit_bag_probe(x: &Array2<f64>, y: &[usize], k: usize, steps: usize, lr: f64) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut w = Array2::<f64>::zeros((d + 1, k));
    let mut xb = Array2::<f64>::ones((n, d + 1));
    xb.slice_mut(ndarray::s![.., ..d]).assign(x);
    for _ in 0..steps {
        let mut g = xb.dot(&w);
        for (mut row, &label) in g.rows_mut().into_iter().zip(y) {
            let m = row.fold(f64::MIN, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row /= s;
            row[label] -= 1.0;
        }
        w -= &(xb.t().dot(&g) * (lr / n as f64));
    }
    w
}

#[test]
fn language_is_linearly_recoverable_from_bags_of_tokens() {
    let specs = family(8, 0);
    let vocab = SyntheticLanguageSpec::vocabulary(&specs);
    let corpus = generate_corpus(&specs, 500, TaskKind::TokenTag, 0).unwrap();
    let parts = polyprobe::data::stratified_split(&corpus, &[0.8, 0.2], 0).unwrap();
    let bag = |xs: &[polyprobe::data::LabeledExample]| {
        let mut m = Array2::<f64>::zeros((xs.len(), vocab.len()));
        for (i, e) in xs.iter().enumerate() {
            for &t in e.sequence.tokens() {
                m[[i, t as usize]] += 1.0 / e.sequence.len() as f64;
            }
        }
        m
    };
    let (train, test) = (&parts[0], &parts[1]);
    let y: Vec<usize> = train.iter().map(|e| e.language).collect();
    let w = fit_bag_probe(&bag(train), &y, 8, 300, 20.0);
    let xt = bag(test);
    let mut xb = Array2::<f64>::ones((xt.nrows(), xt.ncols() + 1));
    xb.slice_mut(ndarray::s![.., ..xt.ncols()]).assign(&xt);
    let preds: Vec<usize> = xb
        .dot(&w)
        .rows()
        .into_iter()
        .map(|r| polyprobe::heads::argmax(r.view()))
        .collect();
    let golds: Vec<usize> = test.iter().map(|e| e.language).collect();
    let f1 = polyprobe::analysis::macro_f1(&preds, &golds, 8).unwrap();
    assert!(f1 > 0.95, "bag-of-tokens LID F1 {f1}");
}
