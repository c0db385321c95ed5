//! Deterministic input builders shared by the benchmarks.
//!
//! The generated traffic mimics a small shop: mostly catalog searches, some
//! form posts, a fixed header block. Values come from a seeded generator so
//! every bench run measures the same bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wafml_core::http::{split_container, RawRequest};

const WORDS: [&str; 8] = [
    "shoes", "socks", "hats", "gloves", "scarf", "boots", "belts", "coats",
];
const CITIES: [&str; 4] = ["lisbon", "oslo", "turin", "graz"];

const HEADERS: &str = "Host: shop.example\n\
                       User-Agent: checkout-bot/1.0\n\
                       Accept: text/html";

/// One container of `n` request blocks, three GETs to every POST.
pub fn catalog_container(n: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBE7C);
    let mut out = String::new();
    for i in 0..n {
        let block = if i % 4 == 3 {
            let name = WORDS[rng.gen_range(0..WORDS.len())];
            let city = CITIES[rng.gen_range(0..CITIES.len())];
            format!(
                "POST /account/profile HTTP/1.1\n{HEADERS}\n\
                 Content-Type: application/x-www-form-urlencoded\n\n\
                 name={name}&city={city}&address=12%20elm%20st\n"
            )
        } else {
            let page = rng.gen_range(1..=50);
            let q = WORDS[rng.gen_range(0..WORDS.len())];
            format!("GET /catalog/search?page={page}&q={q} HTTP/1.1\n{HEADERS}\n")
        };
        out.push_str(&block);
        out.push('\n');
    }
    out
}

pub fn catalog_requests(n: usize) -> Vec<RawRequest> {
    split_container("bench", &catalog_container(n))
}
