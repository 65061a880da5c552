use std::io::Write;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use shapemeans::estimation::{JointDesign, SampleData};

use crate::error::{Result, SimError};
use crate::population::Population;

/// `H = allocation.len()` strata formed by ranking `ν` and cutting the
/// ranks into equal contiguous blocks; SRSWOR of `n_h` units within each.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedDesign {
    allocation: Vec<usize>,
    /// Stratum of every population unit.
    stratum: Vec<usize>,
    /// Units of each stratum in ascending index order.
    members: Vec<Vec<usize>>,
}

impl StratifiedDesign {
    /// Blocks differ in size by at most one when `N` is not divisible by `H`;
    /// the lower-ranked blocks take the extra units.
    pub fn new(pop: &Population, allocation: &[usize]) -> Result<Self> {
        let h = allocation.len();
        if h == 0 {
            return Err(SimError::Config("empty allocation".into()));
        }
        let n = pop.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pop.nu[a].total_cmp(&pop.nu[b]).then(a.cmp(&b)));

        let mut stratum = vec![0; n];
        let mut members = vec![Vec::new(); h];
        let (base, extra) = (n / h, n % h);
        let mut start = 0;
        for (s, block) in members.iter_mut().enumerate() {
            let size = base + usize::from(s < extra);
            for &k in &order[start..start + size] {
                stratum[k] = s;
                block.push(k);
            }
            block.sort_unstable();
            start += size;
        }
        for (s, (&nh, block)) in allocation.iter().zip(&members).enumerate() {
            if nh == 0 || nh > block.len() {
                return Err(SimError::Config(format!(
                    "allocation {nh} for stratum {} must lie in 1..={}",
                    s + 1,
                    block.len()
                )));
            }
        }
        Ok(StratifiedDesign { allocation: allocation.to_vec(), stratum, members })
    }

    pub fn allocation(&self) -> &[usize] {
        &self.allocation
    }

    pub fn stratum_sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// `π = n_h / N_h` per stratum.
    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        self.allocation.iter().zip(&self.members).map(|(&n, m)| n as f64 / m.len() as f64).collect()
    }

    pub fn stratum_of(&self, unit: usize) -> usize {
        self.stratum[unit]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawnSample {
    pub data: SampleData,
    /// Population index of every sampled unit, ascending within stratum.
    pub units: Vec<usize>,
}

impl DrawnSample {
    /// Sample as CSV: `unit_id,y,pi,domain,stratum` with 1-based ids.
    /// Floats are written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["unit_id", "y", "pi", "domain", "stratum"])?;
        let s = &self.data;
        let strata = s.stratum().expect("drawn samples are stratified");
        for (k, unit) in self.units.iter().enumerate() {
            w.write_record([
                (unit + 1).to_string(),
                s.y()[k].to_string(),
                s.pi()[k].to_string(),
                (s.domain()[k] + 1).to_string(),
                (strata[k] + 1).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// SRSWOR within each stratum. Units come out stratum by stratum.
pub fn draw_sample(pop: &Population, design: &StratifiedDesign, rng: &mut ChaCha8Rng) -> Result<DrawnSample> {
    let probs = design.inclusion_probabilities();
    let total: usize = design.allocation.iter().sum();
    let (mut y, mut pi, mut domain, mut stratum, mut units) = (
        Vec::with_capacity(total),
        Vec::with_capacity(total),
        Vec::with_capacity(total),
        Vec::with_capacity(total),
        Vec::with_capacity(total),
    );
    for (h, block) in design.members.iter().enumerate() {
        let mut picked: Vec<usize> = index::sample(rng, block.len(), design.allocation[h]).into_iter().map(|i| block[i]).collect();
        picked.sort_unstable();
        for k in picked {
            y.push(pop.y[k]);
            pi.push(probs[h]);
            domain.push(pop.domain[k]);
            stratum.push(h);
            units.push(k);
        }
    }
    let data = SampleData::new(y, pi, domain)?.with_strata(stratum)?.with_design(JointDesign::StratifiedSrswor)?;
    Ok(DrawnSample { data, units })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{generate_population, Layout, PopulationSpec};
    use rand::SeedableRng;

    fn population() -> Population {
        let spec = PopulationSpec { d1: 6, d2: 4, n_per_domain: 400, sigma: 1.0, layout: Layout::X1Fastest };
        generate_population(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn study_allocation_probabilities() {
        let pop = population();
        let design = StratifiedDesign::new(&pop, &[60, 120, 120, 180]).unwrap();
        assert_eq!(design.stratum_sizes(), vec![2400; 4]);
        assert_eq!(design.inclusion_probabilities(), vec![0.025, 0.05, 0.05, 0.075]);
        let s = draw_sample(&pop, &design, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(s.data.len(), 480);
        let strata = s.data.stratum().unwrap();
        for (h, &n) in [60usize, 120, 120, 180].iter().enumerate() {
            assert_eq!(strata.iter().filter(|&&x| x == h).count(), n);
        }
        let mut u = s.units.clone();
        u.dedup();
        assert_eq!(u.len(), 480);
    }

    #[test]
    fn strata_follow_nu_ranks() {
        let pop = population();
        let design = StratifiedDesign::new(&pop, &[60, 120, 120, 180]).unwrap();
        let max_of = |h| (0..pop.len()).filter(|&k| design.stratum_of(k) == h).map(|k| pop.nu[k]).fold(f64::MIN, f64::max);
        let min_of = |h| (0..pop.len()).filter(|&k| design.stratum_of(k) == h).map(|k| pop.nu[k]).fold(f64::MAX, f64::min);
        for h in 0..3 {
            assert!(max_of(h) <= min_of(h + 1));
        }
    }

    #[test]
    fn census_stratum_and_doubled_allocation() {
        let pop = population();
        let design = StratifiedDesign::new(&pop, &[2400, 120, 120, 180]).unwrap();
        assert_eq!(design.inclusion_probabilities()[0], 1.0);
        let doubled = StratifiedDesign::new(&pop, &[120, 240, 240, 360]).unwrap();
        assert_eq!(doubled.inclusion_probabilities(), vec![0.05, 0.1, 0.1, 0.15]);
        assert!(StratifiedDesign::new(&pop, &[2401, 1, 1, 1]).is_err());
    }

    #[test]
    fn csv_round_trips_exactly() {
        let pop = population();
        let design = StratifiedDesign::new(&pop, &[6, 12, 12, 18]).unwrap();
        let s = draw_sample(&pop, &design, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.unwrap();
            assert_eq!(rec[1].parse::<f64>().unwrap(), s.data.y()[k]);
            assert_eq!(rec[2].parse::<f64>().unwrap(), s.data.pi()[k]);
        }
    }
}
