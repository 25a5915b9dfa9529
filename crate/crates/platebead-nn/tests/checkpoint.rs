//! Checkpoint round-trip: save -> load -> save must reproduce the file byte
//! for byte, and loading must restore names, shapes and descriptor.

use platebead_nn::{checkpoint, UNet, UNetConfig};

#[test]
fn round_trip_is_bit_exact() {
    let net = UNet::new(UNetConfig::new(3, 1, 8));
    let store = net.init_params(5);
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.nnck");
    let p2 = dir.path().join("b.nnck");

    checkpoint::save(&p1, &net.descriptor(), &store).unwrap();
    let (desc, loaded) = checkpoint::load(&p1).unwrap();
    assert_eq!(desc, net.descriptor());
    let names_a: Vec<&str> = store.names().collect();
    let names_b: Vec<&str> = loaded.names().collect();
    assert_eq!(names_a, names_b);
    for (name, v) in store.iter() {
        assert_eq!(v.shape(), loaded.get(name).shape());
    }

    checkpoint::save(&p2, &desc, &loaded).unwrap();
    let a = std::fs::read(&p1).unwrap();
    let b = std::fs::read(&p2).unwrap();
    assert_eq!(a, b, "second save differs from the first");
    assert!(!a.is_empty() && &a[..4] == b"NNCK");
}

#[test]
fn corrupted_magic_is_rejected() {
    let net = UNet::new(UNetConfig::new(1, 1, 8));
    let store = net.init_params(1);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.nnck");
    checkpoint::save(&p, "{}", &store).unwrap();
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[0] = b'X';
    std::fs::write(&p, bytes).unwrap();
    assert!(checkpoint::load(&p).is_err());
}
