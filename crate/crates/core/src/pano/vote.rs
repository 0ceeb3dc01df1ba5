//! Category mask voting: class-agnostic proposals are scored by the
//! confidences of overlapping open-vocabulary instance masks.

use super::raster::{Mask, Raster};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MaskProposal {
    pub mask: Mask,
    /// Per-pixel confidence; absent means 1 wherever the mask is set.
    pub confidence: Option<Raster>,
    pub label: String,
}

impl MaskProposal {
    pub fn new(mask: Mask, confidence: Option<Raster>, label: impl Into<String>) -> Result<Self> {
        if let Some(c) = &confidence {
            if (c.width(), c.height()) != mask.dims() {
                return Err(Error::Raster("confidence and mask dimensions differ".into()));
            }
        }
        Ok(MaskProposal { mask, confidence, label: label.into() })
    }

    fn confidence_at(&self, i: usize) -> f64 {
        match &self.confidence {
            Some(c) => c.data()[i * c.channels()] as f64,
            None => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteParams {
    pub tau_iou: f64,
    pub tau_vote: f64,
}

impl Default for VoteParams {
    fn default() -> Self {
        VoteParams { tau_iou: 0.5, tau_vote: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub score: f64,
    /// Indices of OVS masks whose IoU with the proposal exceeds `tau_iou`.
    pub voters: Vec<usize>,
    /// Proposal ∪ voters when retained.
    pub refined: Option<Mask>,
}

/// Scores every proposal; entry `i` belongs to `proposals[i]`.
pub fn mask_vote(proposals: &[Mask], ovs: &[MaskProposal], params: VoteParams) -> Result<Vec<Vote>> {
    let dims = proposals.first().map(Mask::dims).or(ovs.first().map(|o| o.mask.dims()));
    if proposals.iter().map(Mask::dims).chain(ovs.iter().map(|o| o.mask.dims())).any(|d| Some(d) != dims) {
        return Err(Error::Raster("all masks must share dimensions".into()));
    }
    let mut out = Vec::with_capacity(proposals.len());
    for prop in proposals {
        let voters: Vec<usize> = (0..ovs.len()).filter(|k| prop.iou(&ovs[*k].mask) > params.tau_iou).collect();
        let (mut sum, mut visible) = (0.0, 0usize);
        for (i, _) in prop.bits().iter().enumerate().filter(|(_, b)| **b) {
            let best = voters
                .iter()
                .filter(|k| ovs[**k].mask.bits()[i])
                .map(|k| ovs[*k].confidence_at(i))
                .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))));
            if let Some(c) = best {
                sum += c;
                visible += 1;
            }
        }
        let score = if visible == 0 { 0.0 } else { sum / visible as f64 };
        let refined = (visible > 0 && score >= params.tau_vote).then(|| {
            let mut m = prop.clone();
            for k in &voters {
                m.union_with(&ovs[*k].mask);
            }
            m
        });
        out.push(Vote { score, voters, refined });
    }
    Ok(out)
}

/// Union of all retained refined masks.
pub fn refined_union(votes: &[Vote], width: usize, height: usize) -> Result<Mask> {
    let mut m = Mask::empty(width, height)?;
    for r in votes.iter().filter_map(|v| v.refined.as_ref()) {
        m.union_with(r);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn rect(w: usize, h: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> Mask {
        let mut m = Mask::empty(w, h).unwrap();
        for y in y0..y1 {
            for x in x0..x1 {
                m.set(x, y, true);
            }
        }
        m
    }

    fn ovs(mask: Mask, conf: f32) -> MaskProposal {
        let c = Raster::filled(mask.width(), mask.height(), 1, conf).unwrap();
        MaskProposal::new(mask, Some(c), "c").unwrap()
    }

    #[test]
    fn exact_overlap_is_retained_unchanged() {
        let p = rect(16, 8, 2, 8, 1, 5);
        let v = mask_vote(std::slice::from_ref(&p), &[ovs(p.clone(), 0.9)], VoteParams::default()).unwrap();
        assert!((v[0].score - 0.9).abs() < 1e-6);
        assert_eq!(v[0].refined.as_ref(), Some(&p));
    }

    #[test]
    fn low_iou_voter_is_ignored() {
        let p = rect(10, 1, 0, 6, 0, 1);
        let o = rect(10, 1, 3, 7, 0, 1);
        // |∩| = 3, |∪| = 7 → IoU 0.43; shrink to 0.3 with a wider OVS mask.
        let o2 = rect(10, 1, 4, 10, 0, 1);
        assert!((p.iou(&o2) - 0.2).abs() < 1e-12);
        let v = mask_vote(std::slice::from_ref(&p), &[ovs(o2, 1.0)], VoteParams::default()).unwrap();
        assert_eq!((v[0].score, v[0].refined.is_none()), (0.0, true));
        let tuned = VoteParams { tau_iou: 0.4, tau_vote: 0.5 };
        let v = mask_vote(&[p], &[ovs(o, 1.0)], tuned).unwrap();
        assert_eq!(v[0].refined.as_ref().unwrap().count(), 7);
    }

    #[test]
    fn iou_of_three_tenths_rejects() {
        let p = rect(10, 1, 0, 3, 0, 1);
        let o = rect(10, 1, 0, 10, 0, 1);
        assert!((p.iou(&o) - 0.3).abs() < 1e-12);
        let v = mask_vote(&[p], &[ovs(o, 1.0)], VoteParams::default()).unwrap();
        assert!(v[0].refined.is_none());
    }

    #[test]
    fn zero_visibility_scores_zero_even_with_zero_threshold() {
        let p = rect(8, 4, 0, 2, 0, 2);
        let v = mask_vote(&[p], &[], VoteParams { tau_iou: 0.5, tau_vote: 0.0 }).unwrap();
        assert_eq!(v[0].score, 0.0);
        assert!(v[0].refined.is_none());
    }

    #[test]
    fn missing_confidence_counts_as_one_and_dims_are_checked() {
        let p = rect(8, 4, 0, 4, 0, 4);
        let o = MaskProposal::new(p.clone(), None, "c").unwrap();
        assert_eq!(mask_vote(std::slice::from_ref(&p), &[o], VoteParams::default()).unwrap()[0].score, 1.0);
        let other = rect(4, 2, 0, 1, 0, 1);
        assert!(mask_vote(&[p], &[ovs(other, 1.0)], VoteParams::default()).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<Mask>, Vec<MaskProposal>)> {
        let m = prop::collection::vec(any::<bool>(), 32);
        let c = prop::collection::vec(0.0f32..1.0, 32);
        (
            prop::collection::vec(m.clone(), 1..5),
            prop::collection::vec((m, c), 0..4),
        )
            .prop_map(|(ps, os)| {
                let ps = ps.into_iter().map(|b| Mask::new(8, 4, b).unwrap()).collect();
                let os = os
                    .into_iter()
                    .map(|(b, c)| MaskProposal::new(Mask::new(8, 4, b).unwrap(), Some(Raster::new(8, 4, 1, c).unwrap()), "c").unwrap())
                    .collect();
                (ps, os)
            })
    }

    proptest! {
        #[test]
        fn refined_masks_are_bounded_by_their_voters((ps, os) in instance(), ti in 0.0f64..0.8, tv in 0.0f64..1.0) {
            let votes = mask_vote(&ps, &os, VoteParams { tau_iou: ti, tau_vote: tv }).unwrap();
            for (p, v) in ps.iter().zip(&votes) {
                if let Some(r) = &v.refined {
                    prop_assert!(p.is_subset_of(r));
                    let mut upper = p.clone();
                    for k in &v.voters { upper.union_with(&os[*k].mask); }
                    prop_assert_eq!(r, &upper);
                }
            }
        }

        #[test]
        fn raising_tau_vote_never_adds((ps, os) in instance(), ti in 0.0f64..0.8, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = (a.min(b), a.max(b));
            let l = mask_vote(&ps, &os, VoteParams { tau_iou: ti, tau_vote: lo }).unwrap();
            let h = mask_vote(&ps, &os, VoteParams { tau_iou: ti, tau_vote: hi }).unwrap();
            for (x, y) in l.iter().zip(&h) {
                prop_assert!(x.refined.is_some() || y.refined.is_none());
            }
        }
    }
}
