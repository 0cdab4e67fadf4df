//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture`). Tolerances are pinned in
//! constants next to each criterion.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use doconto::autodiff::{finite_difference, max_relative_error, Tensor};
use doconto::corpus::{header_records, read_corpus_collect, tokenize, HeaderLevel, HeaderRecord, ReadKind};
use doconto::encoder::{
    build_vocabulary, cae_loss, cae_loss_and_grads, encode_header, train_cae, train_vae,
    vae_forward, vae_loss, vae_loss_and_grads, Autoencoder, CaeParameters, EncodedHeader, Noise,
    OptimizerKind, TrainConfig, VaeForwardOutput, VaeParameters,
};
use doconto::manifold::{joint_probabilities, kmeans, tsne, TsneConfig};
use doconto::ontology::{
    build_base_ontology, default_aliases, emit_turtle, map_header_to_class, parse_turtle,
    MatchMethod, OntologyScope, Term, Triple,
};
use doconto::topics::{build_lexicon, to_bow, train_lda, GibbsSampler, LexiconMode};

const TOY_CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy.jsonl");

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} ({name}): {verdict} — {detail}");
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------
// 1. Gradient oracle: analytic gradients of random tiny VAE and CAE
//    instances match central finite differences.
//    [DERIVED] tolerances: rel err <= 1e-4 per parameter, FD step 1e-5,
//    frozen after the oracle run converged well below them.

const GRAD_REL_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const GRAD_INSTANCES: usize = 12; // per model kind; 24 total >= 20
const GRAD_TIME_BUDGET_S: u64 = 30;

fn tiny_config(rng: &mut ChaCha8Rng) -> (TrainConfig, usize, EncodedHeader) {
    let vocab_size = rng.gen_range(2..=7);
    let cfg = TrainConfig {
        seq_len: rng.gen_range(1..=4),
        embed_dim: rng.gen_range(1..=3),
        hidden_dim: rng.gen_range(1..=3),
        latent_dim: rng.gen_range(1..=3),
        conv_width: rng.gen_range(1..=3),
        conv_channels: rng.gen_range(1..=2),
        pool_factor: rng.gen_range(1..=2),
        ..TrainConfig::default()
    };
    let input = EncodedHeader {
        indices: (0..cfg.seq_len).map(|_| rng.gen_range(0..vocab_size)).collect(),
    };
    (cfg, vocab_size, input)
}

#[test]
fn criterion_1_gradient_oracle() {
    let start = Instant::now();
    let mut worst = 0.0f64;

    // check at a generic point: zero-initialized biases leave ReLU
    // pre-activations exactly on the kink, where central differences and
    // the subgradient legitimately disagree
    let jitter = |tensors: Vec<&mut Tensor>, rng: &mut ChaCha8Rng| {
        for t in tensors {
            for v in t.data.iter_mut() {
                *v += rng.gen_range(-0.2..0.2);
            }
        }
    };

    for seed in 0..GRAD_INSTANCES as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cfg, vocab_size, input) = tiny_config(&mut rng);
        let mut p = VaeParameters::init(&cfg, vocab_size, &mut rng);
        jitter(p.tensors_mut(), &mut rng);
        let p = p;
        let eps: Vec<f64> = (0..cfg.latent_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, analytic) = vae_loss_and_grads(&p, &input, &eps).unwrap();
        let params: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
        let f = |ts: &[Tensor]| {
            let mut q = p.clone();
            for (dst, src) in q.tensors_mut().into_iter().zip(ts) {
                dst.data.clone_from(&src.data);
            }
            let out = vae_forward(&q, std::slice::from_ref(&input), &Noise::Explicit(vec![eps.clone()]))
                .unwrap();
            vae_loss(&out[0], &input, vocab_size).2
        };
        for (which, a) in analytic.iter().enumerate() {
            let numeric = finite_difference(&params, which, FD_STEP, &f);
            worst = worst.max(max_relative_error(a, &numeric));
        }
    }

    for seed in 100..100 + GRAD_INSTANCES as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cfg, vocab_size, input) = tiny_config(&mut rng);
        let mut p = CaeParameters::init(&cfg, vocab_size, &mut rng);
        jitter(p.tensors_mut(), &mut rng);
        let p = p;
        let (_, analytic) = cae_loss_and_grads(&p, &input).unwrap();
        let params: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
        let f = |ts: &[Tensor]| {
            let mut q = p.clone();
            for (dst, src) in q.tensors_mut().into_iter().zip(ts) {
                dst.data.clone_from(&src.data);
            }
            cae_loss(&q, &input).unwrap()
        };
        for (which, a) in analytic.iter().enumerate() {
            let numeric = finite_difference(&params, which, FD_STEP, &f);
            worst = worst.max(max_relative_error(a, &numeric));
        }
    }

    let elapsed = start.elapsed();
    let pass = worst <= GRAD_REL_TOL && elapsed.as_secs() < GRAD_TIME_BUDGET_S;
    report(
        1,
        "gradient oracle",
        pass,
        &format!(
            "{} instances, worst rel err {worst:.2e} (tol {GRAD_REL_TOL:.0e}), {:?}",
            2 * GRAD_INSTANCES,
            elapsed
        ),
    );
}

// ---------------------------------------------------------------------
// 2. KL closed form. [EXACT] kl(0,0)=0, kl(d=1, mu=1, ls=0)=0.5 within
//    1e-12; kl >= 0 on 1e4 random inputs.

const KL_EXACT_TOL: f64 = 1e-12;
const KL_RANDOM_DRAWS: usize = 10_000;

fn kl_of(mu: Vec<f64>, log_sigma: Vec<f64>) -> f64 {
    // dummy target/reconstruction so vae_loss isolates the KL component
    let d = mu.len();
    let out = VaeForwardOutput {
        z: vec![0.0; d],
        mu,
        log_sigma,
        reconstruction: vec![0.5],
    };
    let target = EncodedHeader { indices: vec![0] };
    vae_loss(&out, &target, 1).1
}

#[test]
fn criterion_2_kl_closed_form() {
    let zero = kl_of(vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]);
    let half = kl_of(vec![1.0], vec![0.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min_kl = f64::INFINITY;
    for _ in 0..KL_RANDOM_DRAWS {
        let d = rng.gen_range(1..=8);
        let mu: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let ls: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
        min_kl = min_kl.min(kl_of(mu, ls));
    }

    let pass = zero.abs() <= KL_EXACT_TOL && (half - 0.5).abs() <= KL_EXACT_TOL && min_kl >= 0.0;
    report(
        2,
        "KL closed form",
        pass,
        &format!(
            "kl(0,0)={zero:.2e}, kl(1,0)-0.5={:.2e}, min over {KL_RANDOM_DRAWS} draws {min_kl:.3}",
            half - 0.5
        ),
    );
}

// ---------------------------------------------------------------------
// 3. Reparameterization contract: z = mu + e^{log_sigma} * eps exactly for
//    injected eps in {0, ones, random}; duplicate headers embed to
//    identical rows. [TRIVIAL] exact f64 equality — both sides evaluate the
//    same expression tree.

#[test]
fn criterion_3_reparameterization_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = TrainConfig {
        seq_len: 4,
        embed_dim: 5,
        hidden_dim: 6,
        latent_dim: 3,
        ..TrainConfig::default()
    };
    let vocab_size = 9;
    let p = VaeParameters::init(&cfg, vocab_size, &mut rng);
    let input = EncodedHeader { indices: vec![1, 4, 0, 7] };

    let random: Vec<f64> = (0..cfg.latent_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let cases = [vec![0.0; cfg.latent_dim], vec![1.0; cfg.latent_dim], random];
    let mut exact = true;
    for eps in &cases {
        let out = &vae_forward(&p, std::slice::from_ref(&input), &Noise::Explicit(vec![eps.clone()]))
            .unwrap()[0];
        for (i, e) in eps.iter().enumerate() {
            let expect = out.mu[i] + out.log_sigma[i].exp() * e;
            exact &= out.z[i] == expect;
        }
    }

    // duplicate headers -> identical embedding rows
    let texts = ["introduction", "results", "introduction", "results", "introduction"];
    let records: Vec<HeaderRecord> = texts
        .iter()
        .map(|t| HeaderRecord {
            doc_id: String::new(),
            level: HeaderLevel::Top,
            normalized: t.to_string(),
            tokens: tokenize(t),
        })
        .collect();
    let vocab = build_vocabulary(&records, 50, 1);
    let encoded: Vec<_> = records.iter().map(|r| encode_header(r, &vocab, cfg.seq_len)).collect();
    let labels: Vec<String> = texts.iter().map(|t| t.to_string()).collect();
    let p2 = VaeParameters::init(&cfg, vocab.size(), &mut rng);
    let em = Autoencoder::Vae(p2).embed_headers(&encoded, &labels);
    let dup_identical = em.row(0) == em.row(2) && em.row(0) == em.row(4) && em.row(1) == em.row(3);

    report(
        3,
        "reparameterization contract",
        exact && dup_identical,
        &format!("z exact for 3 noise cases: {exact}; duplicate rows identical: {dup_identical}"),
    );
}

// ---------------------------------------------------------------------
// 4. Desk-scale training on the bundled toy corpus: VAE final validation
//    total < 50% of its epoch-1 value, and VAE < CAE at equal bottleneck
//    width. [DERIVED] frozen from a one-time oracle run at these exact
//    hyperparameters (seed 7, 200 epochs, matched 8-dim bottlenecks):
//    VAE 138.40 -> 5.26, CAE 140.36 -> 7.16.

const C4_TIME_BUDGET_S: u64 = 300;

#[test]
fn criterion_4_desk_scale_training() {
    let start = Instant::now();
    let (docs, _) = read_corpus_collect(TOY_CORPUS, ReadKind::HeadersOnly).unwrap();
    let (records, _) = header_records(&docs);
    let vocab = build_vocabulary(&records, 200, 1);
    // CAE bottleneck = conv_channels * ceil(seq_len / pool_factor)
    //                = 4 * 2 = 8 = VAE latent_dim, an equal-capacity duel
    let cfg = TrainConfig {
        seq_len: 6,
        embed_dim: 16,
        hidden_dim: 32,
        latent_dim: 8,
        batch_size: 32,
        epochs: 200,
        learning_rate: 1e-3,
        optimizer: OptimizerKind::RmsProp,
        seed: 7,
        conv_channels: 4,
        pool_factor: 3,
        ..TrainConfig::default()
    };
    let encoded: Vec<_> = records.iter().map(|r| encode_header(r, &vocab, cfg.seq_len)).collect();
    let (_, vae_hist) = train_vae(&encoded, vocab.size(), &cfg).unwrap();
    let (_, cae_hist) = train_cae(&encoded, vocab.size(), &cfg).unwrap();

    let vae_first = vae_hist.first().unwrap().val_total;
    let vae_final = vae_hist.last().unwrap().val_total;
    let cae_final = cae_hist.last().unwrap().val_total;
    let elapsed = start.elapsed();

    let halved = vae_final < 0.5 * vae_first;
    let vae_wins = vae_final < cae_final;
    report(
        4,
        "desk-scale training",
        halved && vae_wins && elapsed.as_secs() < C4_TIME_BUDGET_S,
        &format!(
            "VAE val {vae_first:.2} -> {vae_final:.2}, CAE final {cae_final:.2}, {:?}",
            elapsed
        ),
    );
}

// ---------------------------------------------------------------------
// 5. k-means vs brute force. [DERIVED] the separated-pairs family must be
//    exact; 50 random 8-point instances within 5% of optimum (observed
//    worst ratio 1.0000 with 25 restarts); inertia history non-increasing.

const KMEANS_RATIO_TOL: f64 = 1.05;
const KMEANS_RANDOM_SEEDS: u64 = 50;

fn brute_force_inertia(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    for code in 0..(k as u64).pow(n as u32) {
        let mut assign = vec![0usize; n];
        let mut c = code;
        for a in assign.iter_mut() {
            *a = (c % k as u64) as usize;
            c /= k as u64;
        }
        let mut inertia = 0.0;
        for cluster in 0..k {
            let members: Vec<&Vec<f64>> =
                points.iter().zip(&assign).filter(|(_, &a)| a == cluster).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            let mut centroid = vec![0.0; dim];
            for m in &members {
                for d in 0..dim {
                    centroid[d] += m[d];
                }
            }
            for v in centroid.iter_mut() {
                *v /= members.len() as f64;
            }
            for m in &members {
                inertia += m.iter().zip(&centroid).map(|(x, c)| (x - c) * (x - c)).sum::<f64>();
            }
        }
        best = best.min(inertia);
    }
    best
}

fn non_increasing(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] + 1e-9)
}

#[test]
fn criterion_5_kmeans_oracle() {
    // exact family
    let family = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 10.0], vec![10.0, 11.0]];
    let opt = brute_force_inertia(&family, 2);
    let got = kmeans(&family, 2, 0, 100).unwrap();
    let exact = (got.inertia - opt).abs() <= 1e-9 && non_increasing(&got.inertia_history);

    let mut worst_ratio = 0.0f64;
    let mut monotone = true;
    for seed in 0..KMEANS_RANDOM_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> =
            (0..8).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]).collect();
        let opt = brute_force_inertia(&points, 3);
        let got = kmeans(&points, 3, seed, 100).unwrap();
        worst_ratio = worst_ratio.max(got.inertia / opt);
        monotone &= non_increasing(&got.inertia_history);
    }

    report(
        5,
        "k-means oracle",
        exact && worst_ratio <= KMEANS_RATIO_TOL && monotone,
        &format!(
            "family exact: {exact}; worst ratio over {KMEANS_RANDOM_SEEDS} seeds {worst_ratio:.4} \
             (tol {KMEANS_RATIO_TOL}); inertia monotone: {monotone}"
        ),
    );
}

// ---------------------------------------------------------------------
// 6. t-SNE. [DERIVED] per-row achieved perplexity within 1e-3 of target;
//    kl_final <= kl_after_exaggeration on 20 seeded random inputs; far
//    tight 4-point clusters separated in >= 18/20 seeds.

const TSNE_PERPLEXITY_TOL: f64 = 1e-3;
const TSNE_SEEDS: u64 = 20;
const TSNE_MIN_SEPARATED: usize = 18;

#[test]
fn criterion_6_tsne() {
    let mut perp_ok = true;
    let mut kl_ok = true;
    for seed in 0..TSNE_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let dim = 4;
        let data: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let labels: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let em = doconto::EmbeddingMatrix::new(labels, dim, data);
        let aff = joint_probabilities(&em, 3.0).unwrap();
        perp_ok &= aff.achieved_perplexity.iter().all(|&p| (p - 3.0).abs() <= TSNE_PERPLEXITY_TOL);
        let cfg = TsneConfig { perplexity: 3.0, iterations: 300, seed, ..TsneConfig::default() };
        let r = tsne(&em, &cfg).unwrap();
        kl_ok &= r.kl_final <= r.kl_after_exaggeration + 1e-9;
    }

    // two tight 4-point clusters 100 apart must stay separated
    let mut separated = 0;
    for seed in 0..TSNE_SEEDS {
        let n = 8;
        let dim = 3;
        let mut data = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for i in 0..n {
            let base = if i < 4 { 0.0 } else { 100.0 };
            for _ in 0..dim {
                data.push(base + rng.gen_range(-0.5..0.5));
            }
        }
        let labels: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let em = doconto::EmbeddingMatrix::new(labels, dim, data);
        // [DERIVED] gentle learning rate for n=8 — the default 200 is sized
        // for corpus-scale point counts and overshoots here (6/20 separated);
        // oracle run at lr=10, 2000 iters separated 20/20
        let cfg =
            TsneConfig { perplexity: 2.0, iterations: 2000, learning_rate: 10.0, seed };
        let y = tsne(&em, &cfg).unwrap().embedding.points;
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let mut max_intra = 0.0f64;
        let mut min_inter = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = d(y[i], y[j]);
                if (i < 4) == (j < 4) {
                    max_intra = max_intra.max(dist);
                } else {
                    min_inter = min_inter.min(dist);
                }
            }
        }
        if max_intra < min_inter {
            separated += 1;
        }
    }

    report(
        6,
        "t-SNE",
        perp_ok && kl_ok && separated >= TSNE_MIN_SEPARATED,
        &format!(
            "perplexity within {TSNE_PERPLEXITY_TOL}: {perp_ok}; KL non-worsening: {kl_ok}; \
             separated {separated}/{TSNE_SEEDS} (need {TSNE_MIN_SEPARATED})"
        ),
    );
}

// ---------------------------------------------------------------------
// 7. LDA recovery and lexicon filters. [DERIVED] 2-topic purity observed
//    10/10 at these settings, threshold 9/10; count conservation after
//    every sweep; df filter edge cases exact.

const LDA_MIN_PURE_SEEDS: usize = 9;

#[test]
fn criterion_7_lda() {
    // vocabulary-pure topic recovery on a disjoint 2-topic corpus
    let mut pure_seeds = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let texts: Vec<String> = (0..200)
            .map(|i| {
                let pre = if i % 2 == 0 { "alpha" } else { "beta" };
                (0..30).map(|_| format!("{pre}{}", rng.gen_range(0..10))).collect::<Vec<_>>().join(" ")
            })
            .collect();
        let lex = build_lexicon(&texts, LexiconMode::Word, 1, 0.9, 10_000).unwrap();
        let bows: Vec<_> = texts.iter().enumerate().map(|(i, t)| to_bow(t, &lex, "d", i)).collect();
        let model = train_lda(&bows, &lex, 2, 60, 0.1, 0.01, seed).unwrap();
        let all_alpha = |t: usize| model.top_terms(t, 5).iter().all(|(w, _)| w.starts_with("alpha"));
        let all_beta = |t: usize| model.top_terms(t, 5).iter().all(|(w, _)| w.starts_with("beta"));
        let pure = (all_alpha(0) || all_beta(0)) && (all_alpha(1) || all_beta(1));
        if pure && all_alpha(0) != all_alpha(1) {
            pure_seeds += 1;
        }
    }

    // count conservation after every Gibbs sweep
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let texts: Vec<String> = (0..40)
        .map(|_| (0..25).map(|_| format!("w{}", rng.gen_range(0..30))).collect::<Vec<_>>().join(" "))
        .collect();
    let lex = build_lexicon(&texts, LexiconMode::Word, 1, 0.9, 10_000).unwrap();
    let bows: Vec<_> = texts.iter().enumerate().map(|(i, t)| to_bow(t, &lex, "d", i)).collect();
    let mut sampler = GibbsSampler::new(&bows, 4, 0.1, 0.01, lex.size(), 7).unwrap();
    let expected = sampler.corpus_token_count();
    let mut conserved = sampler.total_count() == expected;
    for _ in 0..10 {
        sampler.sweep();
        conserved &= sampler.total_count() == expected;
    }

    // df filters: N=200 sections; term at df=19 excluded (min_sections=20),
    // term at df=21 = 10%+1 excluded (max df = floor(0.1*200) = 20), term
    // at df=20 kept
    let n = 200;
    let sections: Vec<String> = (0..n)
        .map(|i| {
            let mut words = vec![format!("filler{i}")];
            if i < 19 {
                words.push("rare".into());
            }
            if i < 20 {
                words.push("kept".into());
            }
            if i < 21 {
                words.push("common".into());
            }
            words.join(" ")
        })
        .collect();
    let lex = build_lexicon(&sections, LexiconMode::Word, 20, 0.1, 10_000).unwrap();
    let filters_ok = lex.index("rare").is_none()
        && lex.index("common").is_none()
        && lex.index("kept").is_some();

    // cap enforced at configured size; each term skips one section so its
    // df stays under the max_fraction ceiling
    let many: Vec<String> = (0..10)
        .map(|i| {
            (0..10).filter(|w| *w != i).map(|w| format!("term{w}")).collect::<Vec<_>>().join(" ")
        })
        .collect();
    let capped = build_lexicon(&many, LexiconMode::Word, 1, 0.99, 5).unwrap();
    let cap_ok = capped.size() == 5;

    report(
        7,
        "LDA recovery",
        pure_seeds >= LDA_MIN_PURE_SEEDS && conserved && filters_ok && cap_ok,
        &format!(
            "pure topics {pure_seeds}/10 (need {LDA_MIN_PURE_SEEDS}); counts conserved: {conserved}; \
             df filters: {filters_ok}; cap: {cap_ok}"
        ),
    );
}

// ---------------------------------------------------------------------
// 8. Ontology: built-in class sets (20 academic, 10 RFP); Turtle accepted
//    by an external parser with 0 errors; graph-isomorphic round-trip
//    (no blank nodes, so isomorphism is triple-set equality);
//    "conclusion" -> Conclusion; Approach <-> Methodology from both sides.

#[test]
fn criterion_8_ontology() {
    use rio_api::model as rio;
    use rio_api::parser::TriplesParser;

    let academic = build_base_ontology(OntologyScope::Academic);
    let rfp = build_base_ontology(OntologyScope::Rfp);
    let counts_ok = academic.concept_classes().len() == 20 && rfp.concept_classes().len() == 10;

    let graph = build_base_ontology(OntologyScope::Both);
    let ttl = emit_turtle(&graph, &[]);

    // external parser: collect triples, count errors
    let mut external: BTreeSet<Triple> = BTreeSet::new();
    let mut errors = 0usize;
    let mut parser = rio_turtle::TurtleParser::new(ttl.as_bytes(), None);
    while !parser.is_end() {
        let r = parser.parse_step(&mut |t: rio::Triple| -> Result<(), rio_turtle::TurtleError> {
            let subject = match t.subject {
                rio::Subject::NamedNode(n) => n.iri.to_string(),
                other => panic!("unexpected subject {other}"),
            };
            let object = match t.object {
                rio::Term::NamedNode(n) => Term::iri(n.iri),
                rio::Term::Literal(rio::Literal::Simple { value }) => Term::literal(value),
                other => panic!("unexpected object {other}"),
            };
            external.insert(Triple::new(subject, t.predicate.iri, object));
            Ok(())
        });
        if r.is_err() {
            errors += 1;
            break;
        }
    }

    // internal round-trip: parse, re-serialize, parse again
    let parsed = parse_turtle(&ttl).unwrap();
    let reserialized = emit_turtle(&graph, &[]);
    let reparsed = parse_turtle(&reserialized).unwrap();
    let isomorphic = parsed == reparsed && parsed == external;

    let aliases = default_aliases();
    let conclusion = map_header_to_class("conclusion", &graph, &aliases, None);
    let maps_ok = conclusion == Some(("Conclusion".into(), MatchMethod::Exact));

    let sim_ok = graph.similar_to("Approach").contains(&"Methodology")
        && graph.similar_to("Methodology").contains(&"Approach");

    report(
        8,
        "ontology",
        counts_ok && errors == 0 && isomorphic && maps_ok && sim_ok,
        &format!(
            "class sets 20/10: {counts_ok}; external parse errors: {errors}; \
             isomorphic round-trip over {} triples: {isomorphic}; \
             conclusion->Conclusion: {maps_ok}; Approach<->Methodology: {sim_ok}",
            parsed.len()
        ),
    );
}

// ---------------------------------------------------------------------
// 9. End-to-end pipeline: byte-deterministic across two fresh runs, SVG
//    circle count equals the corpus's unique-header count, < 10 minutes.

const PIPELINE_TIME_BUDGET_S: u64 = 600;

#[test]
fn criterion_9_pipeline() {
    use doconto::config::Config;
    use doconto::pipeline::{run_pipeline, PipelineConfig};

    let start = Instant::now();
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");
    let run = |workdir: &std::path::Path| {
        let mut cfg = Config::load(std::path::Path::new(&format!("{root}/configs/desk.cfg"))).unwrap();
        cfg.set("corpus", TOY_CORPUS);
        cfg.set("ontology.aliases", format!("{root}/configs/aliases.tsv"));
        cfg.set("workdir", workdir.to_str().unwrap());
        run_pipeline(&PipelineConfig::from_config(&cfg).unwrap()).unwrap()
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let manifest_a = run(dir_a.path());
    let manifest_b = run(dir_b.path());

    // manifests key outputs by absolute path; compare by file name so the
    // two temp workdirs line up
    let digests = |m: &doconto::pipeline::RunManifest| {
        m.stages
            .iter()
            .flat_map(|s| {
                s.outputs.iter().map(|(k, v)| {
                    let name = std::path::Path::new(k).file_name().unwrap().to_owned();
                    (name, v.clone())
                })
            })
            .collect::<std::collections::BTreeMap<_, _>>()
    };
    let deterministic = digests(&manifest_a) == digests(&manifest_b);

    let (docs, _) = read_corpus_collect(TOY_CORPUS, ReadKind::HeadersOnly).unwrap();
    let (records, _) = header_records(&docs);
    let unique: BTreeSet<&str> = records.iter().map(|r| r.normalized.as_str()).collect();
    let svg = std::fs::read_to_string(dir_a.path().join("clusters.svg")).unwrap();
    let circles = svg.matches("<circle").count();
    let circles_ok = circles == unique.len();

    let elapsed = start.elapsed();
    report(
        9,
        "end-to-end pipeline",
        deterministic && circles_ok && elapsed.as_secs() < PIPELINE_TIME_BUDGET_S,
        &format!(
            "deterministic digests: {deterministic}; {circles} circles vs {} unique headers; {:?}",
            unique.len(),
            elapsed
        ),
    );
}
