//! InceptionV1 (GoogLeNet) graph following the torchvision variant: every conv
//! carries a batchnorm, branch3 uses a 3x3 kernel, and the aux classifiers are
//! omitted (inference only).

use ndarray::{Array1, Array2, Array4};

use crate::nn::{BatchNorm2d, Block, Conv2d, Layer, Linear, MaxPool2d, Network};

struct Builder {
    layers: Vec<Layer>,
    names: Vec<String>,
}

impl Builder {
    fn push(&mut self, name: String, layer: Layer) -> Block {
        self.layers.push(layer);
        self.names.push(name);
        Block::Leaf(self.layers.len() - 1)
    }

    /// conv + bn + relu, torchvision `BasicConv2d`
    fn basic_conv(&mut self, name: &str, ic: usize, oc: usize, k: usize, stride: usize, pad: usize) -> Block {
        let conv = self.push(
            format!("{name}.conv"),
            Layer::Conv2d(Conv2d {
                weight: Array4::zeros((oc, ic, k, k)),
                bias: Array1::zeros(oc),
                stride,
                padding: pad,
                has_bias: false,
            }),
        );
        let bn = self.push(
            format!("{name}.bn"),
            Layer::BatchNorm2d(BatchNorm2d {
                gamma: Array1::ones(oc),
                beta: Array1::zeros(oc),
                running_mean: Array1::zeros(oc),
                running_var: Array1::ones(oc),
                eps: 1e-3,
            }),
        );
        let relu = self.push(format!("{name}.relu"), Layer::Relu);
        Block::Seq(vec![conv, bn, relu])
    }

    fn maxpool(&mut self, name: &str, kernel: usize, stride: usize, padding: usize) -> Block {
        self.push(
            name.to_string(),
            Layer::MaxPool2d(MaxPool2d {
                kernel,
                stride,
                padding,
                ceil_mode: true,
            }),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn inception(
        &mut self,
        name: &str,
        ic: usize,
        ch1x1: usize,
        ch3x3red: usize,
        ch3x3: usize,
        ch5x5red: usize,
        ch5x5: usize,
        pool_proj: usize,
    ) -> Block {
        let b1 = self.basic_conv(&format!("{name}.branch1"), ic, ch1x1, 1, 1, 0);
        let b2 = Block::Seq(vec![
            self.basic_conv(&format!("{name}.branch2.0"), ic, ch3x3red, 1, 1, 0),
            self.basic_conv(&format!("{name}.branch2.1"), ch3x3red, ch3x3, 3, 1, 1),
        ]);
        let b3 = Block::Seq(vec![
            self.basic_conv(&format!("{name}.branch3.0"), ic, ch5x5red, 1, 1, 0),
            self.basic_conv(&format!("{name}.branch3.1"), ch5x5red, ch5x5, 3, 1, 1),
        ]);
        let b4 = Block::Seq(vec![
            self.maxpool(&format!("{name}.branch4.0"), 3, 1, 1),
            self.basic_conv(&format!("{name}.branch4.1"), ic, pool_proj, 1, 1, 0),
        ]);
        Block::Branches(vec![b1, b2, b3, b4])
    }
}

pub fn build_googlenet() -> Network {
    let mut b = Builder {
        layers: Vec::new(),
        names: Vec::new(),
    };
    let root = vec![
        b.basic_conv("conv1", 3, 64, 7, 2, 3),
        b.maxpool("maxpool1", 3, 2, 0),
        b.basic_conv("conv2", 64, 64, 1, 1, 0),
        b.basic_conv("conv3", 64, 192, 3, 1, 1),
        b.maxpool("maxpool2", 3, 2, 0),
        b.inception("inception3a", 192, 64, 96, 128, 16, 32, 32),
        b.inception("inception3b", 256, 128, 128, 192, 32, 96, 64),
        b.maxpool("maxpool3", 3, 2, 0),
        b.inception("inception4a", 480, 192, 96, 208, 16, 48, 64),
        b.inception("inception4b", 512, 160, 112, 224, 24, 64, 64),
        b.inception("inception4c", 512, 128, 128, 256, 24, 64, 64),
        b.inception("inception4d", 512, 112, 144, 288, 32, 64, 64),
        b.inception("inception4e", 528, 256, 160, 320, 32, 128, 128),
        b.maxpool("maxpool4", 2, 2, 0),
        b.inception("inception5a", 832, 256, 160, 320, 32, 128, 128),
        b.inception("inception5b", 832, 384, 192, 384, 48, 128, 128),
        b.push("avgpool".into(), Layer::GlobalAvgPool),
        b.push(
            "fc".into(),
            Layer::Linear(Linear {
                weight: Array2::zeros((1000, 1024)),
                bias: Array1::zeros(1000),
            }),
        ),
    ];
    Network {
        layers: b.layers,
        names: b.names,
        root: Block::Seq(root),
    }
}
