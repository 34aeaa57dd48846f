//! Binary spike rasters (neuron × time bin) and their sparse text format.
//!
//! Text format, one record per line:
//!
//! ```text
//! n_neurons,n_bins,dt
//! neuron,bin
//! neuron,bin
//! ...
//! ```
//!
//! Pairs are written in (neuron, bin) order; readers accept any order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeRaster {
    n_neurons: usize,
    n_bins: usize,
    /// Bin width in ms. Stored as bits so the raster stays `Eq`.
    dt_bits: u64,
    words_per_neuron: usize,
    bits: Vec<u64>,
}

impl SpikeRaster {
    pub fn new(n_neurons: usize, n_bins: usize, dt: f64) -> Self {
        let words_per_neuron = n_bins.div_ceil(64);
        Self {
            n_neurons,
            n_bins,
            dt_bits: dt.to_bits(),
            words_per_neuron,
            bits: vec![0; n_neurons * words_per_neuron],
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn dt(&self) -> f64 {
        f64::from_bits(self.dt_bits)
    }

    pub fn duration(&self) -> f64 {
        self.n_bins as f64 * self.dt()
    }

    #[inline]
    fn index(&self, neuron: usize, bin: usize) -> (usize, u64) {
        debug_assert!(neuron < self.n_neurons && bin < self.n_bins);
        (neuron * self.words_per_neuron + bin / 64, 1u64 << (bin % 64))
    }

    #[inline]
    pub fn get(&self, neuron: usize, bin: usize) -> bool {
        let (w, m) = self.index(neuron, bin);
        self.bits[w] & m != 0
    }

    #[inline]
    pub fn set(&mut self, neuron: usize, bin: usize, value: bool) {
        let (w, m) = self.index(neuron, bin);
        if value {
            self.bits[w] |= m;
        } else {
            self.bits[w] &= !m;
        }
    }

    /// Total spike count `S`.
    pub fn spike_count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn neuron_counts(&self) -> Vec<u64> {
        self.bits
            .chunks(self.words_per_neuron.max(1))
            .take(self.n_neurons)
            .map(|c| c.iter().map(|w| w.count_ones() as u64).sum())
            .collect()
    }

    /// Spike count of `neuron` over bins `[start, end)`.
    pub fn count_in(&self, neuron: usize, start: usize, end: usize) -> u64 {
        (start..end.min(self.n_bins)).filter(|&b| self.get(neuron, b)).count() as u64
    }

    /// Bins at which `neuron` spiked, ascending.
    pub fn spike_bins(&self, neuron: usize) -> Vec<usize> {
        let base = neuron * self.words_per_neuron;
        let mut out = Vec::new();
        for (k, &word) in self.bits[base..base + self.words_per_neuron].iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let tz = w.trailing_zeros() as usize;
                out.push(k * 64 + tz);
                w &= w - 1;
            }
        }
        out
    }

    /// All (neuron, bin) pairs, neuron-major.
    pub fn events(&self) -> Vec<(usize, usize)> {
        (0..self.n_neurons)
            .flat_map(|n| self.spike_bins(n).into_iter().map(move |b| (n, b)))
            .collect()
    }

    /// Restriction to the given neurons, in order.
    pub fn select_neurons(&self, neurons: &[usize]) -> SpikeRaster {
        let mut out = SpikeRaster::new(neurons.len(), self.n_bins, self.dt());
        for (dst, &src) in neurons.iter().enumerate() {
            let s = src * self.words_per_neuron;
            let d = dst * out.words_per_neuron;
            out.bits[d..d + self.words_per_neuron]
                .copy_from_slice(&self.bits[s..s + self.words_per_neuron]);
        }
        out
    }

    /// The first `n_bins` bins (all of them if the raster is shorter).
    pub fn truncate(&self, n_bins: usize) -> SpikeRaster {
        let n_bins = n_bins.min(self.n_bins);
        let mut out = SpikeRaster::new(self.n_neurons, n_bins, self.dt());
        for n in 0..self.n_neurons {
            for b in self.spike_bins(n) {
                if b >= n_bins {
                    break;
                }
                out.set(n, b, true);
            }
        }
        out
    }

    /// Stacks the neurons of `other` below those of `self`.
    pub fn stack(&self, other: &SpikeRaster) -> Result<SpikeRaster> {
        if self.n_bins != other.n_bins || self.dt_bits != other.dt_bits {
            return Err(Error::InvalidArgument("rasters differ in bins or dt".into()));
        }
        let mut out = self.clone();
        out.n_neurons += other.n_neurons;
        out.bits.extend_from_slice(&other.bits);
        Ok(out)
    }

    pub fn write_sparse<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{},{}", self.n_neurons, self.n_bins, self.dt())?;
        for (n, b) in self.events() {
            writeln!(w, "{n},{b}")?;
        }
        Ok(())
    }

    pub fn read_sparse<R: BufRead>(r: R) -> Result<SpikeRaster> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty raster file".into()))??;
        let fields: Vec<&str> = header.trim().split(',').collect();
        let parse_err = |what: &str, line: &str| Error::Data(format!("bad {what} in raster line '{line}'"));
        if fields.len() != 3 {
            return Err(parse_err("header", &header));
        }
        let n: usize = fields[0].trim().parse().map_err(|_| parse_err("n_neurons", &header))?;
        let bins: usize = fields[1].trim().parse().map_err(|_| parse_err("n_bins", &header))?;
        let dt: f64 = fields[2].trim().parse().map_err(|_| parse_err("dt", &header))?;
        let mut raster = SpikeRaster::new(n, bins, dt);
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| parse_err("pair", line))?;
            let neuron: usize = a.trim().parse().map_err(|_| parse_err("neuron", line))?;
            let bin: usize = b.trim().parse().map_err(|_| parse_err("bin", line))?;
            if neuron >= n || bin >= bins {
                return Err(Error::Data(format!("spike ({neuron}, {bin}) outside {n}x{bins} raster")));
            }
            raster.set(neuron, bin, true);
        }
        Ok(raster)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_raster_counts() {
        let mut r = SpikeRaster::new(10, 5, 1.0);
        for n in 0..10 {
            for b in 0..5 {
                r.set(n, b, true);
            }
        }
        assert_eq!(r.spike_count(), 50);
        assert!(r.neuron_counts().iter().all(|&c| c == 5));
    }

    proptest! {
        #[test]
        fn popcount_matches_brute_force(
            n in 1usize..12, bins in 1usize..200,
            cells in proptest::collection::vec((0usize..12, 0usize..200), 0..300)
        ) {
            let mut r = SpikeRaster::new(n, bins, 0.5);
            let mut dense = vec![vec![false; bins]; n];
            for (a, b) in cells {
                if a < n && b < bins {
                    r.set(a, b, true);
                    dense[a][b] = true;
                }
            }
            let brute: u64 = dense.iter().flatten().filter(|&&x| x).count() as u64;
            prop_assert_eq!(r.spike_count(), brute);

            let mut buf = Vec::new();
            r.write_sparse(&mut buf).unwrap();
            let back = SpikeRaster::read_sparse(&buf[..]).unwrap();
            prop_assert_eq!(back, r);
        }
    }

    #[test]
    fn rejects_out_of_range_pairs() {
        let text = "2,3,1\n0,1\n2,0\n";
        assert!(matches!(SpikeRaster::read_sparse(text.as_bytes()), Err(Error::Data(_))));
    }
}
