//! Seeded generator of labeled synthetic bank transactions.
//!
//! Descriptions are assembled from per-sector vocabularies: sector-exclusive
//! keywords, enterprise names, typical bank prefixes, shared noise, cities,
//! numbers and alphanumeric codes. Class shares follow the published sector
//! distribution. The keyword lists double as ground truth for explanation
//! tests: a keyword lemma is only ever emitted for its own sector.

use chrono::NaiveDate;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SectorLabel, Transaction, N_SECTORS};

/// Percentage of each sector, in [`SectorLabel::ALL`] order.
pub const SECTOR_SHARES: [f64; N_SECTORS] = [23.18, 10.84, 9.00, 11.34, 7.25, 16.80, 16.15, 5.38];

struct Vocab {
    /// (lemma, surface forms)
    keywords: &'static [(&'static str, &'static [&'static str])],
    /// The first six appear in the bundled enterprise corpus.
    enterprises: &'static [&'static str],
    prefixes: &'static [&'static str],
    amount: (f64, f64),
}

const KNOWN_ENTERPRISES: usize = 6;

fn vocab(sector: SectorLabel) -> &'static Vocab {
    match sector {
        SectorLabel::GasStations => &Vocab {
            keywords: &[
                ("gasolinera", &["GASOLINERA", "GASOLINERAS", "Gasolinera"]),
                ("carburante", &["CARBURANTE", "CARBURANTES"]),
                ("combustible", &["COMBUSTIBLE", "COMBUSTIBLES"]),
                ("gasoleo", &["GASOLEO", "GASÓLEO"]),
                ("gasolina", &["GASOLINA"]),
            ],
            enterprises: &[
                "REPSOL", "CEPSA", "BALLENOIL", "CEDIPSA", "GALP", "PETRONOR", "PLENOIL", "PETROPRIX",
            ],
            prefixes: &["PAGO TARJ.", "COMPRA TARJ.", "E.S.", "ESTACION DE SERVICIO", "AREA DE SERVICIO"],
            amount: (20.0, 95.0),
        },
        SectorLabel::PrivateTransport => &Vocab {
            keywords: &[
                ("taxi", &["TAXI", "TAXIS", "Taxi"]),
                ("vtc", &["VTC"]),
                ("radiotaxi", &["RADIOTAXI"]),
                ("trayecto", &["TRAYECTO", "TRAYECTOS"]),
                ("chofer", &["CHOFER", "CHÓFER"]),
            ],
            enterprises: &["CABIFY", "UBER", "BOLT", "FREENOW", "TELETAXI", "BLABLACAR", "AURO", "ZITY"],
            prefixes: &["PAGO TARJ.", "COMPRA TARJ.", "LIC", "PAGO MOVIL", "SERVICIO"],
            amount: (5.0, 45.0),
        },
        SectorLabel::PublicTransport => &Vocab {
            keywords: &[
                ("billete", &["BILLETE", "BILLETES"]),
                ("autobus", &["AUTOBUS", "AUTOBÚS", "AUTOBUSES"]),
                ("tren", &["TREN", "TRENES"]),
                ("metro", &["METRO"]),
                ("abono", &["ABONO", "ABONOS"]),
                ("cercanias", &["CERCANIAS", "CERCANÍAS"]),
                ("tranvia", &["TRANVIA", "TRANVÍA"]),
            ],
            enterprises: &["RENFE", "ALSA", "EMT", "AVANZA", "MONBUS", "OUIGO", "IRYO", "TUSSAM"],
            prefixes: &["COMPRA TARJ.", "TJ", "PAGO TARJ.", "VIAJEROS", "COMPRA APP"],
            amount: (2.0, 150.0),
        },
        SectorLabel::Flights => &Vocab {
            keywords: &[
                ("vuelo", &["VUELO", "VUELOS"]),
                ("aerolinea", &["AEROLINEA", "AEROLÍNEA", "AEROLÍNEAS"]),
                ("embarque", &["EMBARQUE"]),
                ("aeropuerto", &["AEROPUERTO"]),
                ("pasaje", &["PASAJE", "PASAJES"]),
            ],
            enterprises: &[
                "RYANAIR", "VUELING", "IBERIA", "EASYJET", "VOLOTEA", "AIR EUROPA", "BINTER", "TRANSAVIA",
            ],
            prefixes: &["COMPRA TARJ.", "COMPRA INTERNET", "RESERVA", "PAGO TARJ."],
            amount: (20.0, 320.0),
        },
        SectorLabel::ParcelCourier => &Vocab {
            keywords: &[
                ("envio", &["ENVIO", "ENVÍO", "ENVÍOS"]),
                ("paquete", &["PAQUETE", "PAQUETES"]),
                ("mensajeria", &["MENSAJERIA", "MENSAJERÍA"]),
                ("paqueteria", &["PAQUETERIA", "PAQUETERÍA"]),
                ("franqueo", &["FRANQUEO"]),
                ("courier", &["COURIER"]),
            ],
            enterprises: &["CORREOS", "SEUR", "MRW", "DHL", "GLS", "NACEX", "ZELERIS", "TIPSA"],
            prefixes: &["SE", "PAGO", "COMPRA TARJ.", "OFICINA"],
            amount: (3.0, 45.0),
        },
        SectorLabel::WaterBill => &Vocab {
            keywords: &[
                ("agua", &["AGUA", "AGUAS", "Agua"]),
                ("saneamiento", &["SANEAMIENTO"]),
                ("alcantarillado", &["ALCANTARILLADO"]),
                ("abastecimiento", &["ABASTECIMIENTO"]),
                ("depuracion", &["DEPURACION", "DEPURACIÓN"]),
            ],
            enterprises: &[
                "AQUALIA", "VIAQUA", "EMASESA", "CANAL DE ISABEL II", "AGBAR", "EMAYA", "EMASAGRA", "AIGUES",
            ],
            prefixes: &["RECIBO", "ADEUDO", "RECIBO REFERENCIA", "DOMICILIACION"],
            amount: (15.0, 120.0),
        },
        SectorLabel::ElectricityBill => &Vocab {
            keywords: &[
                ("electricidad", &["ELECTRICIDAD"]),
                ("luz", &["LUZ", "Luz"]),
                ("potencia", &["POTENCIA"]),
                ("kwh", &["KWH", "kWh"]),
            ],
            enterprises: &[
                "IBERDROLA", "ENDESA", "HOLALUZ", "NEXUS ENERGIA", "LUCERA", "CURENERGIA", "PODO", "FENIE",
            ],
            prefixes: &["RECIBO", "FACTURA", "ADEUDO", "RECIBO REFERENCIA MANDATO"],
            amount: (20.0, 150.0),
        },
        SectorLabel::GasBill => &Vocab {
            keywords: &[
                ("gas", &["GAS", "Gas"]),
                ("butano", &["BUTANO"]),
                ("propano", &["PROPANO"]),
                ("bombona", &["BOMBONA", "BOMBONAS"]),
            ],
            enterprises: &[
                "NATURGY", "NEDGIA", "REDEXIS", "MADRILEÑA RED DE GAS", "PRIMAGAS", "NORTEGAS", "VITOGAS",
                "GASINDUR",
            ],
            prefixes: &["FACTURA", "RECIBO", "ADEUDO", "FACTURA DE"],
            amount: (15.0, 120.0),
        },
    }
}

const CITIES: &[&str] = &[
    "MADRID", "VIGO", "VALENCIA", "SEVILLA", "BILBAO", "ALBAL", "LEGANES", "VILLENA", "PONTEVEDRA",
    "ZARAGOZA", "CORUÑA", "MALAGA", "BARCELONA", "GIJON",
];

const NOISE: &[&str] = &[
    "ONLINE", "INTERNET", "APP", "CLIENTES", "REFERENCIA", "MANDATO", "CUOTA", "CARGO", "CENTRO", "NORTE",
    "SUR", "VIRTUAL",
];

/// Lemmas of the sector-exclusive keywords.
pub fn sector_keywords(sector: SectorLabel) -> Vec<&'static str> {
    vocab(sector).keywords.iter().map(|(lemma, _)| *lemma).collect()
}

/// Enterprise names the generator uses for a sector, known ones first.
pub fn sector_enterprises(sector: SectorLabel) -> &'static [&'static str] {
    vocab(sector).enterprises
}

/// Sector owning a keyword lemma, if any.
pub fn keyword_sector(lemma: &str) -> Option<SectorLabel> {
    SectorLabel::ALL
        .into_iter()
        .find(|&s| vocab(s).keywords.iter().any(|(k, _)| *k == lemma))
}

/// Rows per sector for a corpus of `n`: largest-remainder apportionment of
/// the published shares with at least one row per sector.
pub fn class_counts(n: usize) -> [usize; N_SECTORS] {
    assert!(n >= N_SECTORS, "need at least one row per sector");
    let total: f64 = SECTOR_SHARES.iter().sum();
    let quotas: Vec<f64> = SECTOR_SHARES.iter().map(|s| s / total * n as f64).collect();
    let mut counts = [0usize; N_SECTORS];
    for (c, q) in counts.iter_mut().zip(&quotas) {
        *c = (q.floor() as usize).max(1);
    }
    let mut order: Vec<usize> = (0..N_SECTORS).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = counts.iter().sum();
    let mut i = 0;
    while assigned < n {
        counts[order[i % N_SECTORS]] += 1;
        assigned += 1;
        i += 1;
    }
    while assigned > n {
        // only reachable when the min-one floor overshoots on tiny n
        let big = (0..N_SECTORS).max_by_key(|&c| (counts[c], N_SECTORS - c)).unwrap();
        counts[big] -= 1;
        assigned -= 1;
    }
    counts
}

fn digits(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let len = rng.random_range(lo..=hi);
    (0..len).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect()
}

fn code(rng: &mut ChaCha8Rng) -> String {
    let alphabet = b"ABCDEFGHJKLMNPQRSTUVWXYZ0123456789";
    loop {
        let len = rng.random_range(5..=8);
        let s: String = (0..len)
            .map(|_| char::from(*alphabet.choose(rng).unwrap()))
            .collect();
        let letters = s.chars().any(|c| c.is_ascii_alphabetic());
        let nums = s.chars().any(|c| c.is_ascii_digit());
        if letters && nums {
            return s;
        }
    }
}

fn describe(sector: SectorLabel, rng: &mut ChaCha8Rng) -> String {
    let v = vocab(sector);
    let mut body: Vec<String> = Vec::new();

    let roll: f64 = rng.random();
    let (with_keyword, with_enterprise) = match roll {
        r if r < 0.04 => (false, false),
        r if r < 0.46 => (true, true),
        r if r < 0.72 => (true, false),
        _ => (false, true),
    };
    if with_keyword {
        let (_, surfaces) = v.keywords.choose(rng).unwrap();
        body.push(surfaces.choose(rng).unwrap().to_string());
    }
    if with_enterprise {
        let mut name = v.enterprises.choose(rng).unwrap().to_string();
        if rng.random_bool(0.2) {
            name.push_str(if rng.random_bool(0.5) { " S.L." } else { " S.A." });
        }
        body.push(name);
    }
    if rng.random_bool(0.35) {
        body.push(CITIES.choose(rng).unwrap().to_string());
    }
    if rng.random_bool(0.3) || body.is_empty() {
        body.push(NOISE.choose(rng).unwrap().to_string());
    }
    body.shuffle(rng);

    let mut parts: Vec<String> = Vec::new();
    if rng.random_bool(0.7) || !with_keyword && !with_enterprise {
        parts.push(v.prefixes.choose(rng).unwrap().to_string());
    }
    parts.extend(body);
    if rng.random_bool(0.6) {
        let at = rng.random_range(0..=parts.len());
        parts.insert(at, digits(rng, 4, 9));
    }
    if rng.random_bool(0.25) {
        parts.push(code(rng));
    }
    if parts.len() >= 2 && rng.random_bool(0.15) {
        let i = rng.random_range(0..parts.len() - 1);
        let right = parts.remove(i + 1);
        parts[i] = format!("{}-{}", parts[i], right);
    }
    parts.join(" ")
}

/// `n` labeled transactions (n >= 8), deterministic in `seed`.
pub fn generate_synthetic_corpus(n: usize, seed: u64) -> Vec<Transaction> {
    let counts = class_counts(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<SectorLabel> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(SectorLabel::ALL[c], k))
        .collect();
    labels.shuffle(&mut rng);

    let start = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
    labels
        .into_iter()
        .enumerate()
        .map(|(i, sector)| {
            let description = describe(sector, &mut rng);
            let (lo, hi) = vocab(sector).amount;
            let cents = (rng.random_range(lo..hi) * 100.0).round() / 100.0;
            let date = start + chrono::Days::new(rng.random_range(0..365));
            Transaction::new(format!("T{:05}", i + 1), &description, cents)
                .with_date(date)
                .with_label(sector)
        })
        .collect()
}

/// Enterprise names whose records ship in the bundled enterprise corpus.
pub fn known_enterprises(sector: SectorLabel) -> &'static [&'static str] {
    &vocab(sector).enterprises[..KNOWN_ENTERPRISES]
}
