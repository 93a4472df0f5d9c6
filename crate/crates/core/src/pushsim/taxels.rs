use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::physics::ContactInfo;
use crate::episode::{TactileFrame, TACTILE_DIM, TAXEL_COLS, TAXEL_ROWS};

/// Raw sensor reading with nothing in contact.
pub const REST_VALUE: f32 = 0.4;
pub const REST_NOISE_SIGMA: f32 = 0.01;
/// Footprint width, in taxel pitches.
const FOOTPRINT_SIGMA: f64 = 1.0;
/// Raw units per simulator force unit.
const NORMAL_GAIN: f64 = 0.45;
const SHEAR_GAIN: f64 = 0.3;
/// Contact height on the pad, in taxel rows (1.5 is the pad centre).
const CONTACT_ROW: f64 = 1.5;

pub fn footprint(row_c: f64, col_c: f64, row: usize, col: usize) -> f64 {
    let dr = row as f64 - row_c;
    let dc = col as f64 - col_c;
    (-(dr * dr + dc * dc) / (2.0 * FOOTPRINT_SIGMA * FOOTPRINT_SIGMA)).exp()
}

/// Maps a contact onto the 4×4 pad: forces spread over a Gaussian footprint
/// around the contact location, on top of the rest value. `noise_seed`
/// adds rest-level sensor noise; `None` gives a noiseless reading.
pub fn sense_taxels(contact: &ContactInfo, noise_seed: Option<u64>) -> TactileFrame {
    let mut taxels = [REST_VALUE; TACTILE_DIM];
    if contact.in_contact {
        let col_c = 1.5 + contact.pad_offset;
        for row in 0..TAXEL_ROWS {
            for col in 0..TAXEL_COLS {
                let g = footprint(CONTACT_ROW, col_c, row, col);
                let i = TactileFrame::index(row, col, 0);
                taxels[i] = (REST_VALUE as f64 + NORMAL_GAIN * contact.normal_force * g) as f32;
                taxels[i + 1] = (REST_VALUE as f64 + SHEAR_GAIN * contact.tangential[0] * g) as f32;
                taxels[i + 2] = (REST_VALUE as f64 + SHEAR_GAIN * contact.tangential[1] * g) as f32;
            }
        }
    }
    if let Some(seed) = noise_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, REST_NOISE_SIGMA).expect("positive sigma");
        for v in taxels.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    TactileFrame::new(taxels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contact(normal: f64, pad_offset: f64) -> ContactInfo {
        ContactInfo {
            in_contact: true,
            point: [0.0, 0.0],
            normal_force: normal,
            tangential: [0.2, 0.1],
            pad_offset,
        }
    }

    #[test]
    fn no_contact_is_rest() {
        let f = sense_taxels(&ContactInfo::none(), None);
        assert!(f.taxels.iter().all(|&v| v == REST_VALUE));
    }

    #[test]
    fn centred_contact_peaks_in_the_middle() {
        let f = sense_taxels(&contact(1.0, 0.0), None);
        let (mut best, mut at) = (f32::MIN, (0, 0));
        for r in 0..4 {
            for c in 0..4 {
                if f.get(r, c, 0) > best {
                    best = f.get(r, c, 0);
                    at = (r, c);
                }
            }
        }
        assert!((1..=2).contains(&at.0) && (1..=2).contains(&at.1), "{at:?}");
    }

    #[test]
    fn normal_channel_is_linear_in_force() {
        let a = sense_taxels(&contact(0.7, 0.3), None);
        let b = sense_taxels(&contact(1.4, 0.3), None);
        for r in 0..4 {
            for c in 0..4 {
                let da = (a.get(r, c, 0) - REST_VALUE) as f64;
                let db = (b.get(r, c, 0) - REST_VALUE) as f64;
                assert!((db - 2.0 * da).abs() < 1e-6, "{da} {db}");
            }
        }
    }

    #[test]
    fn noise_is_seeded() {
        let a = sense_taxels(&ContactInfo::none(), Some(3));
        let b = sense_taxels(&ContactInfo::none(), Some(3));
        let c = sense_taxels(&ContactInfo::none(), Some(4));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.taxels.iter().all(|v| (v - REST_VALUE).abs() < 0.06));
    }
}
