//! Rule sets for the seven demonstration network functions. Only NAT is a
//! published rule set; the others are reconstructions matching the published
//! rule counts.

pub const NAT: &str = include_str!("../fixtures/nat.rules");
pub const FIREWALL: &str = include_str!("../fixtures/firewall.rules");
pub const SERVER_BALANCER: &str = include_str!("../fixtures/server_balancer.rules");
pub const LINK_BALANCER: &str = include_str!("../fixtures/link_balancer.rules");
pub const DSCP_MARKER: &str = include_str!("../fixtures/dscp_marker.rules");
pub const ROUTER: &str = include_str!("../fixtures/router.rules");
pub const PAT: &str = include_str!("../fixtures/pat.rules");

/// `(name, rules)` in table order.
pub const TABLE1: [(&str, &str); 7] = [
    ("nat", NAT),
    ("firewall", FIREWALL),
    ("server_balancer", SERVER_BALANCER),
    ("link_balancer", LINK_BALANCER),
    ("dscp_marker", DSCP_MARKER),
    ("router", ROUTER),
    ("pat", PAT),
];

pub fn by_name(name: &str) -> Option<&'static str> {
    TABLE1
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, rules)| *rules)
}
