use super::ParamInit;
use crate::error::Result;
use crate::graph::{Conv2dGeometry, Graph, Var};
use crate::params::{ParamId, ParamKind, ParamStore};

/// Stride-1 convolution over time with "same" padding on `[time, channels]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Conv1d {
    /// Layers feeding batch norm should pass `bias = false`: the
    /// normalisation cancels any per-channel offset.
    pub fn new(
        init: &mut ParamInit,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        bias: bool,
    ) -> Result<Self> {
        let mut s = init.scope(name);
        let fan_in = kernel * in_channels;
        let weight = s.glorot("weight", vec![fan_in, out_channels], fan_in, kernel * out_channels)?;
        let bias = if bias {
            Some(s.constant("bias", ParamKind::Bias, vec![out_channels], 0.0)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            kernel,
            in_channels,
            out_channels,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let cols = g.im2col_1d(x, self.kernel)?;
        let w = g.param(store, self.weight);
        let y = g.matmul(cols, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(store, b);
                g.add(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Square-kernel 2-D convolution on channels-last `[h * w, c]` maps.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Conv2d {
    pub fn new(
        init: &mut ParamInit,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        bias: bool,
    ) -> Result<Self> {
        let mut s = init.scope(name);
        let fan_in = kernel * kernel * in_channels;
        let fan_out = kernel * kernel * out_channels;
        let weight = s.glorot("weight", vec![fan_in, out_channels], fan_in, fan_out)?;
        let bias = if bias {
            Some(s.constant("bias", ParamKind::Bias, vec![out_channels], 0.0)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            kernel,
            stride,
            in_channels,
            out_channels,
        })
    }

    /// Returns the output map and its `(height, width)`.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        height: usize,
        width: usize,
    ) -> Result<(Var, usize, usize)> {
        let geom = Conv2dGeometry {
            height,
            width,
            channels: self.in_channels,
            kernel: self.kernel,
            stride: self.stride,
        };
        let cols = g.im2col_2d(x, geom)?;
        let w = g.param(store, self.weight);
        let mut y = g.matmul(cols, w)?;
        if let Some(b) = self.bias {
            let b = g.param(store, b);
            y = g.add(y, b)?;
        }
        Ok((y, geom.out_height(), geom.out_width()))
    }
}
