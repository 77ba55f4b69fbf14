//! ResNet-18 graph with torchvision parameter names. Weights are loaded
//! separately from a `.ppwt` file.

use ndarray::{Array1, Array2, Array4};

use crate::nn::{BatchNorm2d, Block, Conv2d, Layer, Linear, MaxPool2d, Network};

struct Builder {
    layers: Vec<Layer>,
    names: Vec<String>,
}

impl Builder {
    fn push(&mut self, name: &str, layer: Layer) -> Block {
        self.layers.push(layer);
        self.names.push(name.to_string());
        Block::Leaf(self.layers.len() - 1)
    }

    fn conv(&mut self, name: &str, ic: usize, oc: usize, k: usize, stride: usize, pad: usize) -> Block {
        self.push(
            name,
            Layer::Conv2d(Conv2d {
                weight: Array4::zeros((oc, ic, k, k)),
                bias: Array1::zeros(oc),
                stride,
                padding: pad,
                has_bias: false,
            }),
        )
    }

    fn bn(&mut self, name: &str, c: usize) -> Block {
        self.push(
            name,
            Layer::BatchNorm2d(BatchNorm2d {
                gamma: Array1::ones(c),
                beta: Array1::zeros(c),
                running_mean: Array1::zeros(c),
                running_var: Array1::ones(c),
                eps: 1e-5,
            }),
        )
    }
}

pub fn build_resnet18() -> Network {
    let mut b = Builder {
        layers: Vec::new(),
        names: Vec::new(),
    };
    let mut root = vec![
        b.conv("conv1", 3, 64, 7, 2, 3),
        b.bn("bn1", 64),
        b.push("relu", Layer::Relu),
        b.push(
            "maxpool",
            Layer::MaxPool2d(MaxPool2d {
                kernel: 3,
                stride: 2,
                padding: 1,
                ceil_mode: false,
            }),
        ),
    ];
    let stages: [(usize, usize, usize); 4] =
        [(64, 64, 1), (64, 128, 2), (128, 256, 2), (256, 512, 2)];
    for (si, &(ic, oc, stride)) in stages.iter().enumerate() {
        let stage = si + 1;
        for blk in 0..2 {
            let p = format!("layer{stage}.{blk}");
            let (bic, bstride) = if blk == 0 { (ic, stride) } else { (oc, 1) };
            let main = Block::Seq(vec![
                b.conv(&format!("{p}.conv1"), bic, oc, 3, bstride, 1),
                b.bn(&format!("{p}.bn1"), oc),
                b.push(&format!("{p}.relu"), Layer::Relu),
                b.conv(&format!("{p}.conv2"), oc, oc, 3, 1, 1),
                b.bn(&format!("{p}.bn2"), oc),
            ]);
            let shortcut = if blk == 0 && (bic != oc || bstride != 1) {
                Block::Seq(vec![
                    b.conv(&format!("{p}.downsample.0"), bic, oc, 1, bstride, 0),
                    b.bn(&format!("{p}.downsample.1"), oc),
                ])
            } else {
                Block::Seq(vec![])
            };
            root.push(Block::Residual {
                main: Box::new(main),
                shortcut: Box::new(shortcut),
            });
            root.push(b.push(&format!("{p}.relu_out"), Layer::Relu));
        }
    }
    root.push(b.push("avgpool", Layer::GlobalAvgPool));
    root.push(b.push(
        "fc",
        Layer::Linear(Linear {
            weight: Array2::zeros((1000, 512)),
            bias: Array1::zeros(1000),
        }),
    ));
    Network {
        layers: b.layers,
        names: b.names,
        root: Block::Seq(root),
    }
}
