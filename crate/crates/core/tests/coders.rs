use proptest::prelude::*;

use lzrobust::bitcodes::{decode_int, encode_int, int_code_len};
use lzrobust::coder::{compression_ratio, decodability_check, ratio_curve, ratio_f64, Coder};
use lzrobust::harness::make_coder;
use lzrobust::kt::MixtureCoder;
use lzrobust::lz::{lz78_parse, BlockCoder, Lz78, LzWindow, Window};
use lzrobust::BitString;

fn words(max: usize) -> impl Strategy<Value = BitString> {
    prop_oneof![
        prop::collection::vec(any::<bool>(), 0..max),
        prop::collection::vec(prop::bool::weighted(0.05), 0..max),
        prop::collection::vec(prop::bool::weighted(0.9), 0..max),
    ]
    .prop_map(BitString::from_bits)
}

fn lz_coders() -> Vec<Box<dyn Coder>> {
    ["lz78", "lz78-coord", "lzwin", "lzwin:4", "lzwin:inf", "block:7", "block:64:lzwin:8"]
        .iter()
        .map(|s| make_coder(s).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn lz_round_trip(x in words(400)) {
        for c in lz_coders() {
            prop_assert_eq!(c.decode(&c.encode(&x)).unwrap(), x.clone(), "{}", c.name());
        }
    }

    #[test]
    fn lz_separating(x in words(200), y in words(200)) {
        for c in lz_coders() {
            prop_assert!(decodability_check(&c, &[(x.clone(), y.clone())]).ok(), "{}", c.name());
        }
    }

    #[test]
    fn prefix_lengths_agree_with_encode(x in words(300), k in 1usize..40) {
        let cps: Vec<usize> = (0..=x.len()).step_by(k).collect();
        for c in lz_coders() {
            let fast = c.prefix_code_lens(&x, &cps);
            for (&n, &f) in cps.iter().zip(&fast) {
                prop_assert_eq!(f, c.encode(&x.prefix(n)).len() as u64, "{} n={}", c.name(), n);
            }
        }
    }

    #[test]
    fn int_code_self_delimits(k in 1u64..u64::MAX, tail in words(20)) {
        let mut s = encode_int(k).unwrap();
        prop_assert_eq!(s.len(), int_code_len(k));
        s.append(&tail);
        prop_assert_eq!(decode_int(&s).unwrap(), (k, int_code_len(k)));
    }

    #[test]
    fn lz78_phrases_are_new(x in words(400)) {
        let parse = lz78_parse(&x);
        let phrases = parse.phrase_strings(&x);
        let complete: Vec<_> = parse.complete().collect();
        let mut seen = std::collections::BTreeSet::new();
        for (i, p) in phrases.iter().enumerate() {
            if i < complete.len() {
                prop_assert!(seen.insert(p.to_string()), "repeated phrase {}", p);
                let head = p.prefix(p.len() - 1);
                prop_assert!(head.is_empty() || seen.contains(&head.to_string()));
            } else {
                prop_assert!(seen.contains(&p.to_string()));
            }
        }
        let joined: BitString = phrases.iter().flat_map(|p| p.bits().to_vec()).collect();
        prop_assert_eq!(joined, x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixture_round_trip_and_separation(x in words(40), y in words(40)) {
        let c = MixtureCoder::new(3);
        prop_assert_eq!(c.decode(&c.encode(&x)).unwrap(), x.clone());
        prop_assert!(decodability_check(&c, &[(x, y)]).ok());
    }
}

/// Length of the index-form LZ78 code of `0^n`, from the phrase structure `0, 00, 000, ...`.
fn zeros_code_len(n: usize) -> u64 {
    let width = |j: usize| if j <= 1 { 0 } else { (usize::BITS - (j - 1).leading_zeros()) as u64 };
    let mut bits = int_code_len(n as u64 + 1) as u64;
    let (mut used, mut j) = (0, 1);
    while used + j <= n {
        bits += width(j) + 1;
        used += j;
        j += 1;
    }
    if used < n {
        bits += width(j);
    }
    bits
}

#[test]
fn zeros_follow_the_phrase_formula() {
    let lz = Lz78::new();
    for n in [1, 2, 3, 4, 5, 6, 7, 10, 100, 1000, 4097] {
        assert_eq!(lz.code_len(&BitString::zeros(n)), zeros_code_len(n), "n={n}");
    }
    let n = 1 << 16;
    let r = ratio_f64(compression_ratio(&lz, &BitString::zeros(n)).unwrap());
    assert_eq!(r, zeros_code_len(n) as f64 / n as f64);
    assert!((0.045..0.05).contains(&r), "{r}");
}

#[test]
fn window_on_zeros_is_one_literal_then_one_match() {
    let w = LzWindow::new(Window::Bounded(16));
    let x = BitString::zeros(64);
    let code = w.encode(&x);
    assert_eq!(w.decode(&code).unwrap(), x);
    assert!(code.len() < 40, "{}", code.len());
}

#[test]
fn ratio_curve_uses_stride_multiples() {
    let x: BitString = (0..1000).map(|i| i % 3 == 0).collect();
    let c = ratio_curve(&Lz78::new(), &x, 128).unwrap();
    let ns: Vec<usize> = c.points.iter().map(|p| p.n).collect();
    assert_eq!(ns, (1..=7).map(|k| k * 128).collect::<Vec<_>>());
    assert!(ratio_curve(&Lz78::new(), &x, 0).is_err());
}

#[test]
fn block_coder_adds_blocks() {
    let inner = Lz78::new();
    let b = BlockCoder::new(8, Lz78::new());
    let x: BitString = "0110100110010110".parse().unwrap();
    let direct = inner.code_len(&x.slice(0, 8)) + inner.code_len(&x.slice(8, 16));
    // two full blocks, the length header and the empty-tail marker
    assert!(b.code_len(&x) > direct);
    assert_eq!(b.decode(&b.encode(&x)).unwrap(), x);
}

#[test]
fn random_data_does_not_compress() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let x: BitString = (0..1 << 16).map(|_| rng.gen::<bool>()).collect();
    for c in lz_coders() {
        let r = ratio_f64(compression_ratio(&c, &x).unwrap());
        assert!(r > 0.95, "{} {r}", c.name());
    }
}
