use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::checksum::{self, PseudoHeader};
use super::WireError;

/// Extra inputs a handler may need beyond the bytes in its scope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HandlerContext {
    pub pseudo: Option<PseudoHeader>,
}

/// A computed header field such as a checksum or CRC.
///
/// `compute` receives the scope bytes with the handler's own field zeroed
/// when that field lies inside the scope. `verify` receives the scope bytes
/// exactly as they appear on the wire together with the decoded field value.
pub trait FieldHandler: Send + Sync {
    fn id(&self) -> &'static str;

    fn compute(&self, scope: &[u8], ctx: &HandlerContext) -> Result<u64, WireError>;

    fn verify(&self, scope: &[u8], value: u64, ctx: &HandlerContext) -> Result<bool, WireError>;
}

struct InternetChecksum;

impl FieldHandler for InternetChecksum {
    fn id(&self) -> &'static str {
        "internet-checksum"
    }

    fn compute(&self, scope: &[u8], _: &HandlerContext) -> Result<u64, WireError> {
        Ok(u64::from(checksum::internet_checksum(scope)))
    }

    fn verify(&self, scope: &[u8], _: u64, _: &HandlerContext) -> Result<bool, WireError> {
        Ok(checksum::ones_complement_sum(scope, 0) == 0xFFFF)
    }
}

struct PseudoChecksum;

impl FieldHandler for PseudoChecksum {
    fn id(&self) -> &'static str {
        "tcp-udp-pseudo-checksum"
    }

    fn compute(&self, scope: &[u8], ctx: &HandlerContext) -> Result<u64, WireError> {
        let pseudo = ctx.pseudo.ok_or_else(|| WireError::MissingContext(self.id().into()))?;
        // A computed zero is transmitted as all ones; zero means "no checksum" for UDP.
        let c = match checksum::pseudo_checksum(&pseudo, scope) {
            0 => 0xFFFF,
            c => c,
        };
        Ok(u64::from(c))
    }

    fn verify(&self, scope: &[u8], value: u64, ctx: &HandlerContext) -> Result<bool, WireError> {
        let pseudo = ctx.pseudo.ok_or_else(|| WireError::MissingContext(self.id().into()))?;
        if value == 0 && pseudo.protocol == 17 {
            return Ok(true);
        }
        Ok(checksum::pseudo_checksum_valid(&pseudo, scope))
    }
}

struct Crc16Modbus;

impl FieldHandler for Crc16Modbus {
    fn id(&self) -> &'static str {
        "crc16-modbus"
    }

    fn compute(&self, scope: &[u8], _: &HandlerContext) -> Result<u64, WireError> {
        super::crc16_modbus(scope).map(u64::from)
    }

    fn verify(&self, scope: &[u8], value: u64, _: &HandlerContext) -> Result<bool, WireError> {
        Ok(super::crc16_modbus(scope)? as u64 == value)
    }
}

/// Handler lookup by id. Counts every compute/verify call so callers can
/// prove a code path never touched the encapsulation machinery.
pub struct HandlerRegistry {
    entries: BTreeMap<&'static str, Arc<dyn FieldHandler>>,
    invocations: AtomicU64,
}

impl fmt::Debug for HandlerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HandlerRegistry")
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .field("invocations", &self.invocations())
            .finish()
    }
}

impl Default for HandlerRegistry {
    fn default() -> Self {
        Self::shipped()
    }
}

impl HandlerRegistry {
    pub fn empty() -> Self {
        HandlerRegistry {
            entries: BTreeMap::new(),
            invocations: AtomicU64::new(0),
        }
    }

    pub fn shipped() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(InternetChecksum));
        r.register(Arc::new(PseudoChecksum));
        r.register(Arc::new(Crc16Modbus));
        r
    }

    pub fn register(&mut self, handler: Arc<dyn FieldHandler>) {
        self.entries.insert(handler.id(), handler);
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    fn get(&self, id: &str) -> Result<&Arc<dyn FieldHandler>, WireError> {
        self.entries
            .get(id)
            .ok_or_else(|| WireError::UnknownHandler(id.to_string()))
    }

    pub fn compute(&self, id: &str, scope: &[u8], ctx: &HandlerContext) -> Result<u64, WireError> {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        self.get(id)?.compute(scope, ctx)
    }

    pub fn verify(&self, id: &str, scope: &[u8], value: u64, ctx: &HandlerContext) -> Result<bool, WireError> {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        self.get(id)?.verify(scope, value, ctx)
    }

    pub fn invocations(&self) -> u64 {
        self.invocations.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_ids() {
        let r = HandlerRegistry::shipped();
        let ids: Vec<_> = r.ids().collect();
        assert_eq!(ids, ["crc16-modbus", "internet-checksum", "tcp-udp-pseudo-checksum"]);
    }

    #[test]
    fn pseudo_checksum_needs_context() {
        let r = HandlerRegistry::shipped();
        let err = r
            .compute("tcp-udp-pseudo-checksum", &[0; 8], &HandlerContext::default())
            .unwrap_err();
        assert!(matches!(err, WireError::MissingContext(_)));
    }

    #[test]
    fn unknown_handler() {
        let r = HandlerRegistry::shipped();
        assert!(matches!(
            r.compute("fcs", &[1], &HandlerContext::default()),
            Err(WireError::UnknownHandler(_))
        ));
        assert_eq!(r.invocations(), 1);
    }

    #[test]
    fn udp_zero_checksum_is_accepted_tcp_is_not() {
        let r = HandlerRegistry::shipped();
        let mut ctx = HandlerContext {
            pseudo: Some(PseudoHeader {
                src: [10, 0, 0, 1],
                dst: [10, 0, 0, 5],
                protocol: 17,
            }),
        };
        let seg = [0u8, 7, 0, 7, 0, 8, 0, 0];
        assert!(r.verify("tcp-udp-pseudo-checksum", &seg, 0, &ctx).unwrap());
        ctx.pseudo.as_mut().unwrap().protocol = 6;
        assert!(!r.verify("tcp-udp-pseudo-checksum", &seg, 0, &ctx).unwrap());
    }
}
