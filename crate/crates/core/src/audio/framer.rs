//! Overlapping fixed-size frames from an arbitrarily chunked sample stream.

/// Splits a sample stream into frames of `frame_len` advancing by `hop`.
///
/// State is kept across `push` calls, so the frame sequence does not
/// depend on how the stream is chunked. A trailing partial frame is
/// never emitted.
pub struct Framer {
    frame_len: usize,
    hop: usize,
    buf: Vec<f64>,
}

impl Framer {
    pub fn new(frame_len: usize, hop: usize) -> Self {
        assert!(hop >= 1 && frame_len >= hop, "need frame_len >= hop >= 1");
        Self {
            frame_len,
            hop,
            buf: Vec::new(),
        }
    }

    /// Feed a chunk, returning every frame completed by it.
    pub fn push(&mut self, chunk: &[f64]) -> Vec<Vec<f64>> {
        self.buf.extend_from_slice(chunk);
        let mut out = Vec::new();
        let mut start = 0;
        while start + self.frame_len <= self.buf.len() {
            out.push(self.buf[start..start + self.frame_len].to_vec());
            start += self.hop;
        }
        self.buf.drain(..start);
        out
    }
}

/// Frame a complete sample slice in one call.
pub fn frames(samples: &[f64], frame_len: usize, hop: usize) -> Vec<Vec<f64>> {
    Framer::new(frame_len, hop).push(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn frames_by_definition() {
        let got = frames(&seq(10), 4, 2);
        assert_eq!(
            got,
            vec![
                vec![1.0, 2.0, 3.0, 4.0],
                vec![3.0, 4.0, 5.0, 6.0],
                vec![5.0, 6.0, 7.0, 8.0],
                vec![7.0, 8.0, 9.0, 10.0],
            ]
        );
    }

    #[test]
    fn chunk_boundaries_do_not_matter() {
        let mut f = Framer::new(4, 2);
        let mut got = f.push(&seq(10)[..3]);
        got.extend(f.push(&seq(10)[3..]));
        assert_eq!(got, frames(&seq(10), 4, 2));
    }

    #[test]
    fn trailing_partial_frame_is_dropped() {
        assert_eq!(frames(&seq(9), 4, 2).len(), 3);
    }

    proptest! {
        #[test]
        fn chunking_invariance(
            samples in proptest::collection::vec(-1.0f64..1.0, 0..200),
            cuts in proptest::collection::vec(0usize..200, 0..6),
            frame_len in 1usize..12,
            hop_rel in 1usize..12,
        ) {
            let hop = hop_rel.min(frame_len);
            let whole = frames(&samples, frame_len, hop);

            let mut cuts: Vec<usize> = cuts.into_iter().map(|c| c % (samples.len() + 1)).collect();
            cuts.sort_unstable();
            let mut chunked = Vec::new();
            let mut framer = Framer::new(frame_len, hop);
            let mut prev = 0;
            for c in cuts.into_iter().chain([samples.len()]) {
                chunked.extend(framer.push(&samples[prev..c]));
                prev = c;
            }
            prop_assert_eq!(whole, chunked);
        }
    }
}
