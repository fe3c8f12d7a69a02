use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const INTERESTING: [u8; 7] = [0x00, 0x01, 0x02, 0x7F, 0x80, 0xFE, 0xFF];

/// Seeded random byte-stream fuzzer with a coverage-novelty corpus.
#[derive(Debug, Clone)]
pub struct Fuzzer {
    rng: ChaCha8Rng,
    corpus: Vec<Vec<u8>>,
    max_len: usize,
}

impl Fuzzer {
    pub fn new(rng: ChaCha8Rng, max_len: usize) -> Self {
        Fuzzer {
            rng,
            corpus: Vec::new(),
            max_len: max_len.max(1),
        }
    }

    pub fn corpus_len(&self) -> usize {
        self.corpus.len()
    }

    /// Keeps an input that reached new coverage.
    pub fn keep(&mut self, input: Vec<u8>) {
        self.corpus.push(input);
    }

    pub fn next_input(&mut self) -> Vec<u8> {
        if self.corpus.is_empty() || self.rng.gen_ratio(1, 10) {
            return self.fresh();
        }
        let mut input = self.corpus.choose(&mut self.rng).unwrap().clone();
        for _ in 0..self.rng.gen_range(1..=4) {
            self.mutate(&mut input);
        }
        if input.is_empty() {
            input.push(self.rng.gen());
        }
        input.truncate(self.max_len);
        input
    }

    fn fresh(&mut self) -> Vec<u8> {
        let len = self.rng.gen_range(1..=self.max_len.min(128));
        (0..len).map(|_| self.rng.gen()).collect()
    }

    fn mutate(&mut self, input: &mut Vec<u8>) {
        let len = input.len();
        match self.rng.gen_range(0..6) {
            0 if len > 0 => {
                let i = self.rng.gen_range(0..len);
                input[i] ^= 1 << self.rng.gen_range(0..8);
            }
            1 if len > 0 => {
                let i = self.rng.gen_range(0..len);
                input[i] = self.rng.gen();
            }
            2 if len > 0 => {
                let i = self.rng.gen_range(0..len);
                input[i] = *INTERESTING.choose(&mut self.rng).unwrap();
            }
            3 => {
                let at = self.rng.gen_range(0..=len);
                let n = self.rng.gen_range(1..=8);
                let bytes: Vec<u8> = (0..n).map(|_| self.rng.gen()).collect();
                input.splice(at..at, bytes);
            }
            4 if len > 1 => {
                let at = self.rng.gen_range(0..len);
                let n = self.rng.gen_range(1..=(len - at).min(8));
                input.drain(at..at + n);
            }
            _ => {
                let other = self.corpus.choose(&mut self.rng).cloned().unwrap_or_default();
                let cut = self.rng.gen_range(0..=len);
                let from = self.rng.gen_range(0..=other.len());
                input.truncate(cut);
                input.extend_from_slice(&other[from..]);
            }
        }
    }
}
