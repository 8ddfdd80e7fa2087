mod common;

use ttx::diffusion::{sample, DiffusionError, SampleRequest, SamplerKind};

#[test]
fn same_seed_same_images() {
    let (tuned, _) = common::tiny_pair();
    let req = SampleRequest {
        count: 3,
        steps: 10,
        ..SampleRequest::new("Turkish Patterns", 5)
    };
    let a = sample(&tuned.sampling_context(), &req).unwrap();
    let b = sample(&tuned.sampling_context(), &req).unwrap();
    assert_eq!(a, b);
    let c = sample(&tuned.sampling_context(), &SampleRequest { seed: 6, ..req.clone() }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn outputs_are_storage_space_images_of_checkpoint_size() {
    let (tuned, base) = common::tiny_pair();
    for ckpt in [&tuned, &base] {
        for sampler in [SamplerKind::Ddim { eta: 0.0 }, SamplerKind::Ddim { eta: 0.5 }, SamplerKind::Ddpm] {
            let req = SampleRequest {
                count: 2,
                steps: 8,
                sampler,
                ..SampleRequest::new("Calico Patterns", 1)
            };
            for img in sample(&ckpt.sampling_context(), &req).unwrap() {
                assert_eq!((img.height(), img.width(), img.channels()), (8, 8, 3));
                assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

#[test]
fn full_ancestral_chain_runs() {
    let (tuned, _) = common::tiny_pair();
    let req = SampleRequest {
        steps: tuned.schedule.steps(),
        sampler: SamplerKind::Ddpm,
        ..SampleRequest::new("Calico Patterns", 1)
    };
    let a = sample(&tuned.sampling_context(), &req).unwrap();
    assert_eq!(a, sample(&tuned.sampling_context(), &req).unwrap());
}

#[test]
fn zero_guidance_ignores_the_prompt() {
    let (tuned, _) = common::tiny_pair();
    let unguided = SampleRequest {
        guidance: 0.0,
        steps: 12,
        count: 2,
        ..SampleRequest::new("Turkish Patterns", 3)
    };
    let empty = SampleRequest {
        prompt: String::new(),
        guidance: 3.0,
        ..unguided.clone()
    };
    assert_eq!(
        sample(&tuned.sampling_context(), &unguided).unwrap(),
        sample(&tuned.sampling_context(), &empty).unwrap()
    );
}

#[test]
fn invalid_requests_are_rejected() {
    let (tuned, _) = common::tiny_pair();
    let ctx = tuned.sampling_context();
    let base = SampleRequest::new("Turkish Patterns", 1);
    for bad in [
        SampleRequest { count: 0, ..base.clone() },
        SampleRequest { guidance: -1.0, ..base.clone() },
        SampleRequest { steps: 0, ..base.clone() },
        SampleRequest { steps: tuned.schedule.steps() + 1, ..base.clone() },
        SampleRequest { sampler: SamplerKind::Ddim { eta: 1.5 }, ..base.clone() },
    ] {
        assert!(matches!(sample(&ctx, &bad), Err(DiffusionError::InvalidRequest(_))), "{bad:?}");
    }
}
