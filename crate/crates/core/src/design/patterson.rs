//! Nested Gauss-Patterson rules on [-1, 1] with 1, 3, 7, 15, 31 and 63
//! points, as `(node, weight)` pairs with weights summing to 2.
//!
//! Generated by `tools/gen_patterson.py` (120-digit arithmetic). Rule `i`
//! integrates polynomials up to degree `PATTERSON_EXACTNESS[i]` exactly.

pub const PATTERSON_EXACTNESS: [usize; 6] = [1, 5, 11, 23, 47, 95];

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
pub const PATTERSON_RULES: [&[(f64, f64)]; 6] = [
    // 1 points
    &[
        (0.0, 2.0),
    ],
    // 3 points
    &[
        (-7.7459666924148337704e-1, 0.55555555555555555556),
        (0.0, 0.88888888888888888889),
        (7.7459666924148337704e-1, 0.55555555555555555556),
    ],
    // 7 points
    &[
        (-9.6049126870802028342e-1, 0.10465622602646726519),
        (-7.7459666924148337704e-1, 0.26848808986833344073),
        (-4.34243749346802558e-1, 0.40139741477596222291),
        (0.0, 0.45091653865847414235),
        (4.34243749346802558e-1, 0.40139741477596222291),
        (7.7459666924148337704e-1, 0.26848808986833344073),
        (9.6049126870802028342e-1, 0.10465622602646726519),
    ],
    // 15 points
    &[
        (-9.9383196321275502221e-1, 0.017001719629940260339),
        (-9.6049126870802028342e-1, 0.051603282997079739697),
        (-8.8845923287225699889e-1, 0.092927195315124537686),
        (-7.7459666924148337704e-1, 0.13441525524378422036),
        (-6.2110294673722640294e-1, 0.17151190913639138079),
        (-4.34243749346802558e-1, 0.20062852937698902103),
        (-2.2338668642896688163e-1, 0.2191568584015874964),
        (0.0, 0.22551049979820668739),
        (2.2338668642896688163e-1, 0.2191568584015874964),
        (4.34243749346802558e-1, 0.20062852937698902103),
        (6.2110294673722640294e-1, 0.17151190913639138079),
        (7.7459666924148337704e-1, 0.13441525524378422036),
        (8.8845923287225699889e-1, 0.092927195315124537686),
        (9.6049126870802028342e-1, 0.051603282997079739697),
        (9.9383196321275502221e-1, 0.017001719629940260339),
    ],
    // 31 points
    &[
        (-9.9909812496766759766e-1, 0.0025447807915618744154),
        (-9.9383196321275502221e-1, 0.0084345657393211062463),
        (-9.8153114955374010687e-1, 0.016446049854387810934),
        (-9.6049126870802028342e-1, 0.025807598096176653565),
        (-9.2965485742974005667e-1, 0.035957103307129322097),
        (-8.8845923287225699889e-1, 0.046462893261757986541),
        (-8.367259381688687355e-1, 0.056979509494123357412),
        (-7.7459666924148337704e-1, 0.06720775429599070354),
        (-7.0249620649152707861e-1, 0.076879620499003531043),
        (-6.2110294673722640294e-1, 0.085755920049990351154),
        (-5.3131974364437562397e-1, 0.093627109981264473617),
        (-4.34243749346802558e-1, 0.10031427861179557877),
        (-3.3113539325797683309e-1, 0.10566989358023480974),
        (-2.2338668642896688163e-1, 0.10957842105592463824),
        (-1.1248894313318662575e-1, 0.11195687302095345688),
        (0.0, 0.11275525672076869161),
        (1.1248894313318662575e-1, 0.11195687302095345688),
        (2.2338668642896688163e-1, 0.10957842105592463824),
        (3.3113539325797683309e-1, 0.10566989358023480974),
        (4.34243749346802558e-1, 0.10031427861179557877),
        (5.3131974364437562397e-1, 0.093627109981264473617),
        (6.2110294673722640294e-1, 0.085755920049990351154),
        (7.0249620649152707861e-1, 0.076879620499003531043),
        (7.7459666924148337704e-1, 0.06720775429599070354),
        (8.367259381688687355e-1, 0.056979509494123357412),
        (8.8845923287225699889e-1, 0.046462893261757986541),
        (9.2965485742974005667e-1, 0.035957103307129322097),
        (9.6049126870802028342e-1, 0.025807598096176653565),
        (9.8153114955374010687e-1, 0.016446049854387810934),
        (9.9383196321275502221e-1, 0.0084345657393211062463),
        (9.9909812496766759766e-1, 0.0025447807915618744154),
    ],
    // 63 points
    &[
        (-9.9987288812035761194e-1, 0.00036322148184553065969),
        (-9.9909812496766759766e-1, 0.0012651565562300680114),
        (-9.9720625937222195908e-1, 0.0025790497946856882724),
        (-9.9383196321275502221e-1, 0.0042176304415588548391),
        (-9.8868475754742947994e-1, 0.0061155068221172463397),
        (-9.8153114955374010687e-1, 0.0082230079572359296693),
        (-9.7218287474858179658e-1, 0.010498246909621321898),
        (-9.6049126870802028342e-1, 0.012903800100351265626),
        (-9.4634285837340290515e-1, 0.015406750466559497802),
        (-9.2965485742974005667e-1, 0.017978551568128270333),
        (-9.103711569570042925e-1, 0.020594233915912711149),
        (-8.8845923287225699889e-1, 0.023231446639910269443),
        (-8.6390793819369047715e-1, 0.025869679327214746911),
        (-8.367259381688687355e-1, 0.028489754745833548613),
        (-8.0694053195021761186e-1, 0.03107355111168796488),
        (-7.7459666924148337704e-1, 0.033603877148207730542),
        (-7.3975604435269475868e-1, 0.03606443278078257264),
        (-7.0249620649152707861e-1, 0.038439810249455532039),
        (-6.6290966002478059546e-1, 0.040715510116944318934),
        (-6.2110294673722640294e-1, 0.042877960025007734493),
        (-5.7719571005204581484e-1, 0.044914531653632197414),
        (-5.3131974364437562397e-1, 0.046813554990628012403),
        (-4.8361802694584102756e-1, 0.048564330406673198716),
        (-4.34243749346802558e-1, 0.050157139305899537414),
        (-3.8335932419873034692e-1, 0.051583253952048458777),
        (-3.3113539325797683309e-1, 0.052834946790116519862),
        (-2.7774982202182431507e-1, 0.053905499335266063927),
        (-2.2338668642896688163e-1, 0.054789210527962865032),
        (-1.6823525155220746498e-1, 0.055481404356559363988),
        (-1.1248894313318662575e-1, 0.055978436510476319408),
        (-5.6344313046592789972e-2, 0.056277699831254301273),
        (0.0, 0.056377628360384717388),
        (5.6344313046592789972e-2, 0.056277699831254301273),
        (1.1248894313318662575e-1, 0.055978436510476319408),
        (1.6823525155220746498e-1, 0.055481404356559363988),
        (2.2338668642896688163e-1, 0.054789210527962865032),
        (2.7774982202182431507e-1, 0.053905499335266063927),
        (3.3113539325797683309e-1, 0.052834946790116519862),
        (3.8335932419873034692e-1, 0.051583253952048458777),
        (4.34243749346802558e-1, 0.050157139305899537414),
        (4.8361802694584102756e-1, 0.048564330406673198716),
        (5.3131974364437562397e-1, 0.046813554990628012403),
        (5.7719571005204581484e-1, 0.044914531653632197414),
        (6.2110294673722640294e-1, 0.042877960025007734493),
        (6.6290966002478059546e-1, 0.040715510116944318934),
        (7.0249620649152707861e-1, 0.038439810249455532039),
        (7.3975604435269475868e-1, 0.03606443278078257264),
        (7.7459666924148337704e-1, 0.033603877148207730542),
        (8.0694053195021761186e-1, 0.03107355111168796488),
        (8.367259381688687355e-1, 0.028489754745833548613),
        (8.6390793819369047715e-1, 0.025869679327214746911),
        (8.8845923287225699889e-1, 0.023231446639910269443),
        (9.103711569570042925e-1, 0.020594233915912711149),
        (9.2965485742974005667e-1, 0.017978551568128270333),
        (9.4634285837340290515e-1, 0.015406750466559497802),
        (9.6049126870802028342e-1, 0.012903800100351265626),
        (9.7218287474858179658e-1, 0.010498246909621321898),
        (9.8153114955374010687e-1, 0.0082230079572359296693),
        (9.8868475754742947994e-1, 0.0061155068221172463397),
        (9.9383196321275502221e-1, 0.0042176304415588548391),
        (9.9720625937222195908e-1, 0.0025790497946856882724),
        (9.9909812496766759766e-1, 0.0012651565562300680114),
        (9.9987288812035761194e-1, 0.00036322148184553065969),
    ],
];
